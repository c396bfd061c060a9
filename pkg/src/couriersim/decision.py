"""Memory-learning arbitration.

Computes memory credibility, gates between the memorized action and the
learning policy's action, and implements the episodic and replay-pool
baseline retrievals used for comparison runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .memory import ArrayStore, IndividualStore, MemoryItem, decay_weights
from .observation import OBS_D_MAX, OBS_SCHEMA_VERSION, check_schema


@dataclass
class CredibilityParams:
    """Weights and gate for trusting a memorized action over the policy."""

    w1: float = 0.6  # environment similarity
    w2: float = 0.2  # success ratio
    w3: float = 0.2  # recency decay
    lam: float = 0.9
    theta_memory: float = 0.7
    steps_per_day: int = 360

    def __post_init__(self) -> None:
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-12:
            raise ValueError("credibility weights must sum to 1")
        if not (0.0 <= self.theta_memory <= 1.0):
            raise ValueError("theta_memory must be in [0, 1]")


@dataclass
class DecisionRecord:
    agent_id: int
    step: int
    source: str  # "memory" | "learning"
    chosen_action: int
    best_credibility: float
    matched_store: Optional[ArrayStore] = None
    matched_index: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps({
            "agent_id": self.agent_id,
            "step": self.step,
            "source": self.source,
            "chosen_action": self.chosen_action,
            "best_credibility": self.best_credibility,
            "matched_index": self.matched_index,
        }, separators=(",", ":"))


def env_similarity(obs: np.ndarray, item: MemoryItem) -> float:
    """1 - normalized distance between the query and the item's prior view."""
    check_schema(item.schema_version)
    d = math.sqrt(float(np.sum((obs - item.obs_prev) ** 2)))
    return max(1.0 - d / OBS_D_MAX, 0.0)


def credibility(item: MemoryItem, obs: np.ndarray, now: int,
                params: CredibilityParams) -> float:
    age_days = (now - item.t0) / params.steps_per_day
    return (
        params.w1 * env_similarity(obs, item)
        + params.w2 * item.success_count / item.usage_count
        + params.w3 * params.lam**age_days
    )


def _similarities(obs: np.ndarray, store: ArrayStore) -> np.ndarray:
    diff = store.obs_prev - obs
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.maximum(1.0 - d / OBS_D_MAX, 0.0)


def _argbest(values: np.ndarray, store: ArrayStore) -> int:
    """Index of the maximal value; ties go to newer t0, then lower owner id,
    then insertion order."""
    best = values.max()
    tied = np.flatnonzero(values == best)
    if len(tied) == 1:
        return int(tied[0])
    t0 = store.t0[tied]
    tied = tied[t0 == t0.max()]
    if len(tied) == 1:
        return int(tied[0])
    owner = store.owner[tied]
    tied = tied[owner == owner.min()]
    return int(tied[np.argmin(store.insertion[tied])])


def best_memory_action(
    obs: np.ndarray,
    shared: Optional[ArrayStore],
    now: int,
    params: CredibilityParams,
) -> Optional[tuple[int, float, int]]:
    """Highest-credibility item's (action, credibility, index), if any."""
    if shared is None or len(shared) == 0:
        return None
    c = (
        params.w1 * _similarities(obs, shared)
        + params.w2 * shared.success_ratio()
        + params.w3 * decay_weights(shared.t0, now, params.lam, params.steps_per_day)
    )
    i = _argbest(c, shared)
    return int(shared.action[i]), float(c[i]), i


def decide(
    obs: np.ndarray,
    learning_action: int,
    shared: Optional[ArrayStore],
    now: int,
    params: CredibilityParams,
    owner: int = -1,
    best: Optional[tuple[int, float, int]] = None,
) -> DecisionRecord:
    """Gate between the memorized action and the learning action.

    Strictly-greater comparison: equality at the threshold falls to learning.
    ``best`` may carry a precomputed best_memory_action result (the simulator
    batches retrieval across agents); it must match what best_memory_action
    would return for these inputs.
    """
    if best is None:
        best = best_memory_action(obs, shared, now, params)
    if best is not None and best[1] > params.theta_memory:
        return DecisionRecord(owner, now, "memory", best[0], best[1],
                              matched_store=shared, matched_index=best[2])
    c = best[1] if best is not None else 0.0
    return DecisionRecord(owner, now, "learning", learning_action, c)


def _baseline_scores(obs: np.ndarray, store: ArrayStore, now: int,
                     lam: float, steps_per_day: int) -> np.ndarray:
    # Equal-weight blend of relevance, importance (|delta| clipped), recency.
    return (
        _similarities(obs, store)
        + np.minimum(store.delta_abs, 1.0)
        + decay_weights(store.t0, now, lam, steps_per_day)
    ) / 3.0


def episodic_retrieve(
    obs: np.ndarray,
    individual: IndividualStore,
    now: int,
    lam: float = 0.9,
    steps_per_day: int = 360,
) -> Optional[tuple[int, float, int]]:
    """Best of the agent's own items by relevance/importance/recency."""
    if len(individual) == 0:
        return None
    s = _baseline_scores(obs, individual, now, lam, steps_per_day)
    i = _argbest(s, individual)
    return int(individual.action[i]), float(s[i]), i


def replay_retrieve(
    obs: np.ndarray,
    pool: ArrayStore,
    now: int,
    lam: float = 0.9,
    steps_per_day: int = 360,
) -> Optional[tuple[int, float, int]]:
    """Same scoring as episodic retrieval, over the global unfiltered pool."""
    if len(pool) == 0:
        return None
    s = _baseline_scores(obs, pool, now, lam, steps_per_day)
    i = _argbest(s, pool)
    return int(pool.action[i]), float(s[i]), i


def batched_memory_candidates(
    obs_matrix: np.ndarray,
    store: ArrayStore,
    now: int,
    params: CredibilityParams,
    mode: str,
    owners: Optional[np.ndarray] = None,
    owner_filter: Optional[np.ndarray] = None,
) -> list[Optional[tuple[int, float, int]]]:
    """Vectorized retrieval for many agents against one store snapshot.

    mode "credibility" reproduces best_memory_action; mode "baseline"
    reproduces episodic/replay retrieval.  ``owner_filter`` (one owner id per
    query row, compared against ``owners``) restricts rows to an agent's own
    items for the episodic baseline.
    """
    m = obs_matrix.shape[0]
    if len(store) == 0:
        return [None] * m
    diff2 = (
        np.sum(obs_matrix**2, axis=1)[:, None]
        + np.einsum("ij,ij->i", store.obs_prev, store.obs_prev)[None, :]
        - 2.0 * obs_matrix @ store.obs_prev.T
    )
    sims = np.maximum(1.0 - np.sqrt(np.maximum(diff2, 0.0)) / OBS_D_MAX, 0.0)
    dec = decay_weights(store.t0, now, params.lam, params.steps_per_day)
    if mode == "credibility":
        vals = params.w1 * sims + (params.w2 * store.success_ratio() + params.w3 * dec)
    else:
        vals = (sims + (np.minimum(store.delta_abs, 1.0) + dec)) / 3.0
    out: list[Optional[tuple[int, float, int]]] = []
    for row in range(m):
        v = vals[row]
        if owner_filter is not None:
            mask = owners == owner_filter[row]
            if not mask.any():
                out.append(None)
                continue
            v = np.where(mask, v, -np.inf)
        i = _argbest(v, store)
        out.append((int(store.action[i]), float(v[i]), i))
    return out
