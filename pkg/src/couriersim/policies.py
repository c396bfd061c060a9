"""Learning mechanisms: rule baseline, behavior-cloning imitation with
DAgger-style aggregation, tabular Q-learning on a shared table, and the
deterministic scripted stand-in for a context-limited reasoner."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ACCEPT, MOVE_KINDS, N_ACTION_KINDS, RELOCATE, STAY
from .core import PerceptSet

N_REGIONS = 4
N_TOD_BUCKETS = 12
N_DENSITY_BUCKETS = 4
N_STATUS = 3
N_STATES = N_REGIONS * N_TOD_BUCKETS * N_DENSITY_BUCKETS * N_STATUS  # 576


def density_bucket(n_orders: int) -> int:
    if n_orders == 0:
        return 0
    if n_orders <= 2:
        return 1
    if n_orders <= 5:
        return 2
    return 3


def discretize(region: int, tod: int, n_orders: int, status: int,
               steps_per_day: int = 360) -> int:
    """Map a situation to one of the 576 tabular states."""
    todb = tod * N_TOD_BUCKETS // steps_per_day
    return ((region * N_TOD_BUCKETS + todb) * N_DENSITY_BUCKETS
            + density_bucket(n_orders)) * N_STATUS + status


class QTable:
    """Dense state x action table, shared by every Q-learning agent."""

    def __init__(self) -> None:
        self.table = np.zeros((N_STATES, N_ACTION_KINDS))

    def greedy(self, s: int, legal: np.ndarray) -> int:
        row = np.where(legal, self.table[s], -np.inf)
        return int(np.argmax(row))  # first max = fixed action ordering


def q_update(q: QTable, s: int, a: int, r: float, s_next: int,
             alpha: float, gamma_q: float) -> None:
    """One Bellman backup on the shared table."""
    best_next = float(np.max(q.table[s_next]))
    q.table[s, a] += alpha * (r + gamma_q * best_next - q.table[s, a])


def q_policy(q: QTable, s: int, epsilon: float, rng: np.random.Generator,
             legal: Optional[np.ndarray] = None) -> int:
    """Epsilon-greedy over legal actions."""
    if legal is None:
        legal = np.ones(N_ACTION_KINDS, dtype=bool)
    if epsilon > 0.0 and rng.random() < epsilon:
        choices = np.flatnonzero(legal)
        return int(choices[rng.integers(len(choices))])
    return q.greedy(s, legal)


def epsilon_schedule(step: int, total_steps: int,
                     start: float = 0.3, end: float = 0.05,
                     anneal_fraction: float = 0.2) -> float:
    horizon = max(int(total_steps * anneal_fraction), 1)
    if step >= horizon:
        return end
    return start + (end - start) * (step / horizon)


class ImitationDataset:
    """Aggregated (observation, action) expert pairs.

    Append-only within a run, deduplicated by (contributor, step); nearest
    neighbor queries break ties by earliest insertion.
    """

    def __init__(self) -> None:
        self._obs: list[np.ndarray] = []
        self._actions: list[int] = []
        self._keys: set[tuple[int, int]] = set()
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._actions)

    def add(self, obs: np.ndarray, action: int, contributor: int, step: int) -> bool:
        key = (contributor, step)
        if key in self._keys:
            return False
        self._keys.add(key)
        self._obs.append(np.asarray(obs, dtype=float))
        self._actions.append(int(action))
        self._matrix = None
        return True

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack(self._obs)
        return self._matrix

    def nearest_action(self, obs: np.ndarray) -> int:
        diff = self.matrix() - obs
        d2 = np.einsum("ij,ij->i", diff, diff)
        return self._actions[int(np.argmin(d2))]


def observe_expert(dataset: ImitationDataset, self_earning: float,
                   co_located: list[tuple[int, float, np.ndarray, int]],
                   step: int) -> int:
    """Aggregate pairs from strictly better-earning co-located agents.

    ``co_located`` entries are (agent_id, earning, last_obs, last_action).
    Equal earners contribute nothing.  Returns the number appended.
    """
    appended = 0
    for agent_id, earning, last_obs, last_action in co_located:
        if earning > self_earning and last_obs is not None:
            if dataset.add(last_obs, last_action, agent_id, step):
                appended += 1
    return appended


def rule_policy(percept: PerceptSet, rng: np.random.Generator) -> int:
    """Predefined-rule baseline: follow the planned route while delivering,
    accept the nearest perceived order, otherwise random-walk."""
    if percept.has_path and percept.next_path_move is not None:
        return percept.next_path_move
    if percept.proposed_order is not None or percept.nearest_order is not None:
        return ACCEPT
    return MOVE_KINDS[rng.integers(len(MOVE_KINDS))]


def imitation_policy(obs: np.ndarray, dataset: ImitationDataset,
                     percept: PerceptSet, rng: np.random.Generator) -> int:
    """Nearest-neighbor behavior cloning; empty dataset falls back to rules."""
    if len(dataset) == 0:
        return rule_policy(percept, rng)
    return dataset.nearest_action(obs)


@dataclass
class ScriptConfig:
    """Priority ruleset emulating a context-limited reasoner."""

    accept_min_density_bucket: int = 2  # medium
    relocate_when_empty: bool = True

    def validate(self) -> None:
        if not (0 <= self.accept_min_density_bucket < N_DENSITY_BUCKETS):
            raise ValueError(
                "accept_min_density_bucket out of range: "
                f"{self.accept_min_density_bucket}"
            )


def scripted_policy(percept: PerceptSet, script: ScriptConfig,
                    changes_left: int) -> int:
    """Deterministic priorities: deliver, accept in busy areas, relocate
    toward the densest region (budget permitting), else stay."""
    if percept.has_path and percept.next_path_move is not None:
        return percept.next_path_move
    busy = density_bucket(len(percept.order_ids)) >= script.accept_min_density_bucket
    if busy and (percept.proposed_order is not None or percept.nearest_order is not None):
        return ACCEPT
    if script.relocate_when_empty and changes_left > 0:
        densest = int(np.argmax(percept.region_density))
        if percept.region_density[densest] > 0:
            return RELOCATE
    return STAY
