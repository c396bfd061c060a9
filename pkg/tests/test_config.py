import json

import pytest

from couriersim.config import (ConfigError, ExperimentConfig, desk_config,
                               load_config)


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.n_agents == 50
    assert cfg.steps_per_day == 360
    assert (cfg.width, cfg.height) == (786, 890)
    assert cfg.speed == 10.0 and cfg.scope == 100.0
    assert cfg.survival_cost == 10.0
    assert cfg.alpha == 0.05
    assert (cfg.theta_value, cfg.theta_rare) == (0.9, 0.6)
    assert cfg.k == 4000 and cfg.lam == 0.9
    assert (cfg.w1, cfg.w2, cfg.w3) == (0.6, 0.2, 0.2)
    assert cfg.theta_memory == 0.7
    assert cfg.daily_active_budget == 120
    assert cfg.daily_change_budget == 2


def test_desk_profile():
    cfg = desk_config(seed=3)
    assert cfg.n_agents == 50 and cfg.steps == 3600
    assert cfg.seed == 3


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"n_agents": 5, "speling_mistake": 1})


@pytest.mark.parametrize("bad", [
    {"n_agents": 0},
    {"steps": 0},
    {"speed": 0},
    {"scope": -1},
    {"memory_model": "holographic"},
    {"learning": "psychic"},
    {"learning": {"rule": 3}},                # count does not match n_agents
    {"lam": 1.0},
    {"gamma": 0.0},
    {"k": -1},
    {"w1": 0.5},                              # weights no longer sum to 1
    {"theta_memory": 1.2},
    {"q_gamma": 1.0},
    {"epsilon_start": 0.01},                  # below epsilon_end
    {"daily_active_budget": 121},             # over a third of the day
    {"daily_change_budget": -1},
    {"congestion_prob": 1.5},
    {"n_threads": 0},
    {"accept_min_density_bucket": 9},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_learning_mix_accepted():
    cfg = ExperimentConfig(n_agents=5, learning={"rule": 2, "qlearning": 3})
    per = cfg.learning_per_agent()
    assert per == ["rule", "rule", "qlearning", "qlearning", "qlearning"]


def test_json_round_trip():
    cfg = ExperimentConfig(seed=9, n_agents=4, learning="scripted",
                           memory_model="episodic", congestion_prob=0.1)
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 4, "n_agents": 2, "steps": 10}))
    cfg = load_config(str(path))
    assert (cfg.seed, cfg.n_agents, cfg.steps) == (4, 2, 10)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(str(bad))
    notdict = tmp_path / "list.json"
    notdict.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(str(notdict))


def test_derived_bundles_consistent():
    cfg = ExperimentConfig(lam=0.8, theta_memory=0.5, k=10, steps_per_day=300,
                           daily_active_budget=100)
    mp = cfg.memory_params()
    cp = cfg.credibility_params()
    assert mp.lam == cp.lam == 0.8
    assert mp.k == 10
    assert cp.theta_memory == 0.5
    assert mp.steps_per_day == cp.steps_per_day == 300
