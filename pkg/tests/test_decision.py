import json
import math

import numpy as np
import pytest

from couriersim.decision import (CredibilityParams, DecisionRecord,
                                 batched_memory_candidates, best_memory_action,
                                 credibility, decide, env_similarity,
                                 episodic_retrieve, replay_retrieve)
from couriersim.memory import (CollectiveStore, IndividualStore, make_item,
                               mark_usage)
from couriersim.observation import OBS_D_MAX, OBS_LEN

PARAMS = CredibilityParams()


def item(t0=0, owner=0, action=8, delta=0.0, reward=-10.0, obs_prev=None):
    o1 = np.zeros(OBS_LEN) if obs_prev is None else np.asarray(obs_prev, float)
    return make_item(t0=t0, x=0, y=0, obs_prev=o1, action=action,
                     obs_post=np.zeros(OBS_LEN), reward=reward, delta=delta,
                     owner=owner)


def _random_item(rng):
    m = make_item(
        t0=int(rng.integers(0, 2000)), x=0, y=0,
        obs_prev=rng.random(OBS_LEN), action=int(rng.integers(12)),
        obs_post=rng.random(OBS_LEN), reward=float(rng.normal()),
        delta=float(rng.normal(scale=0.6)), owner=int(rng.integers(6)),
    )
    for _ in range(int(rng.integers(0, 4))):
        mark_usage(m, bool(rng.integers(2)))
    return m


# ----------------------------------------------------------------- similarity

def test_env_similarity_identical_is_one():
    assert env_similarity(np.zeros(OBS_LEN), item()) == 1.0


def test_env_similarity_half_range_single_component():
    obs = np.zeros(OBS_LEN)
    obs[0] = 0.5
    assert env_similarity(obs, item()) == pytest.approx(1 - 0.5 / math.sqrt(15))


def test_env_similarity_clamped_nonnegative():
    obs = np.array([1, 1, 1, -1, -1, 1, 1, 1, 1], dtype=float)
    ref = item(obs_prev=np.array([0, 0, 0, 1, 1, 0, 0, 0, 0], dtype=float))
    assert env_similarity(obs, ref) == 0.0  # distance hits the sqrt(15) bound


# ---------------------------------------------------------------- credibility

def test_credibility_perfect_fresh_item():
    # sim 1, ratio 1, decay 1 -> 0.6 + 0.2 + 0.2
    m = item(reward=5.0)
    assert credibility(m, np.zeros(OBS_LEN), 0, PARAMS) == pytest.approx(1.0)


def test_credibility_three_quarter_ratio():
    m = item(reward=5.0)
    mark_usage(m, True)
    mark_usage(m, True)
    mark_usage(m, False)
    # 0.6 * 1 + 0.2 * 0.75 + 0.2 * 1
    assert credibility(m, np.zeros(OBS_LEN), 0, PARAMS) == pytest.approx(0.95)


def test_credibility_aged_22_days():
    m = item(t0=0, reward=5.0)
    now = 22 * PARAMS.steps_per_day
    expected = 0.6 + 0.2 + 0.2 * 0.9**22
    assert credibility(m, np.zeros(OBS_LEN), now, PARAMS) == pytest.approx(expected)
    assert expected == pytest.approx(0.81970, abs=1e-4)


def test_weight_validation():
    with pytest.raises(ValueError):
        CredibilityParams(w1=0.5, w2=0.2, w3=0.2)
    with pytest.raises(ValueError):
        CredibilityParams(theta_memory=1.5)


# --------------------------------------------------------------------- gating

def test_decide_empty_store_falls_to_learning():
    rec = decide(np.zeros(OBS_LEN), 3, CollectiveStore(), 0, PARAMS, owner=7)
    assert rec.source == "learning"
    assert rec.chosen_action == 3
    assert rec.best_credibility == 0.0
    assert rec.agent_id == 7


def test_decide_memory_wins_above_gate():
    shared = CollectiveStore()
    shared.append(item(action=5, reward=5.0))  # credibility 1.0 at obs zeros
    rec = decide(np.zeros(OBS_LEN), 3, shared, 0, PARAMS)
    assert rec.source == "memory"
    assert rec.chosen_action == 5
    assert rec.matched_index == 0


def test_gate_is_strict_at_threshold():
    # engineer credibility exactly 0.7: sim 0.5, ratio 1, decay 1
    obs = np.zeros(OBS_LEN)
    obs[3] = 0.5 * math.sqrt(15)  # single-component distance of half the bound
    shared = CollectiveStore()
    shared.append(item(action=5, reward=5.0))
    best = best_memory_action(obs, shared, 0, PARAMS)
    assert best[1] == pytest.approx(0.7)
    rec = decide(obs, 3, shared, 0, PARAMS, best=best)
    assert rec.source == "learning"
    assert rec.chosen_action == 3


def test_tie_break_newer_t0():
    shared = CollectiveStore()
    shared.append(item(t0=10, action=1, reward=5.0))
    shared.append(item(t0=10, action=2, reward=5.0))
    shared.append(item(t0=50, action=3, reward=5.0))
    action, c, i = best_memory_action(np.zeros(OBS_LEN), shared, 50, PARAMS)
    # equal sim/ratio; newest t0 also has maximal decay so it wins outright,
    # then among the two t0=10 entries insertion order applies
    assert (action, i) == (3, 2)
    shared2 = CollectiveStore()
    shared2.append(item(t0=10, owner=4, action=1, reward=5.0))
    shared2.append(item(t0=10, owner=2, action=2, reward=5.0))
    _, _, j = best_memory_action(np.zeros(OBS_LEN), shared2, 10, PARAMS)
    assert shared2.items[j].owner == 2  # lower owner id breaks the tie


def test_tie_break_insertion_order():
    shared = CollectiveStore()
    shared.append(item(t0=10, owner=1, action=6, reward=5.0))
    shared.append(item(t0=10, owner=1, action=9, reward=5.0))
    action, _, i = best_memory_action(np.zeros(OBS_LEN), shared, 10, PARAMS)
    assert (action, i) == (6, 0)


def test_decision_record_json():
    rec = DecisionRecord(agent_id=2, step=17, source="memory", chosen_action=9,
                         best_credibility=0.85, matched_index=4)
    data = json.loads(rec.to_json())
    assert data == {"agent_id": 2, "step": 17, "source": "memory",
                    "chosen_action": 9, "best_credibility": 0.85,
                    "matched_index": 4}


# ------------------------------------------------------------------ baselines

def test_episodic_empty_store():
    assert episodic_retrieve(np.zeros(OBS_LEN), IndividualStore(0), 0) is None


def test_episodic_scoring_example():
    ind = IndividualStore(0)
    ind.append(item(t0=0, delta=-0.4, reward=5.0))
    action, s, i = episodic_retrieve(np.zeros(OBS_LEN), ind, 0)
    # (sim 1 + |delta| 0.4 + decay 1) / 3
    assert s == pytest.approx(2.4 / 3)
    assert i == 0


def test_replay_scans_whole_pool():
    pool = CollectiveStore()
    pool.append(item(owner=0, action=1, delta=0.1))
    pool.append(item(owner=3, action=7, delta=0.9))
    action, s, _ = replay_retrieve(np.zeros(OBS_LEN), pool, 0)
    assert action == 7  # higher |delta| wins regardless of owner
    assert s == pytest.approx((1.0 + 0.9 + 1.0) / 3)


# ------------------------------------------------------------ batched == scalar

def test_batched_matches_scalar_credibility():
    rng = np.random.default_rng(11)
    shared = CollectiveStore()
    for _ in range(60):
        shared.append(_random_item(rng))
    obs = rng.random((12, OBS_LEN))
    batched = batched_memory_candidates(obs, shared, 900, PARAMS, "credibility")
    for row in range(12):
        scalar = best_memory_action(obs[row], shared, 900, PARAMS)
        assert batched[row][0] == scalar[0]
        assert batched[row][1] == pytest.approx(scalar[1], abs=1e-9)
        assert batched[row][2] == scalar[2]


def test_batched_matches_scalar_baseline_with_owner_filter():
    rng = np.random.default_rng(12)
    pool = CollectiveStore()
    items = [_random_item(rng) for _ in range(80)]
    for m in items:
        pool.append(m)
    obs = rng.random((6, OBS_LEN))
    owner_filter = np.arange(6)
    batched = batched_memory_candidates(
        obs, pool, 900, PARAMS, "baseline",
        owners=pool.owner, owner_filter=owner_filter)
    for row in range(6):
        ind = IndividualStore(row)
        for m in items:
            if m.owner == row:
                ind.append(m)
        scalar = episodic_retrieve(obs[row], ind, 900)
        if scalar is None:
            assert batched[row] is None
            continue
        assert batched[row][0] == scalar[0]
        assert batched[row][1] == pytest.approx(scalar[1], abs=1e-9)


def test_batched_baseline_matches_replay():
    rng = np.random.default_rng(13)
    pool = CollectiveStore()
    for _ in range(40):
        pool.append(_random_item(rng))
    obs = rng.random((4, OBS_LEN))
    batched = batched_memory_candidates(obs, pool, 500, PARAMS, "baseline")
    for row in range(4):
        scalar = replay_retrieve(obs[row], pool, 500)
        assert batched[row][0] == scalar[0]
        assert batched[row][1] == pytest.approx(scalar[1], abs=1e-9)
        assert batched[row][2] == scalar[2]


def test_batched_empty_store():
    assert batched_memory_candidates(
        np.zeros((3, OBS_LEN)), CollectiveStore(), 0, PARAMS,
        "credibility") == [None, None, None]
