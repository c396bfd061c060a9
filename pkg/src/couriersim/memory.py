"""Three-tier memory hierarchy and its lifecycle.

Recording into the individual store and the per-step buffer pool, admission
into the bounded collective store by value-error / rarity, decay of
short-term items, and score-based top-k pruning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import N_ACTION_KINDS
from .observation import OBS_D_MAX, OBS_LEN, OBS_SCHEMA_VERSION

LONG_TERM = "long_term"
SHORT_TERM = "short_term"

EVENT_DELIVERY = "delivery"
EVENT_WEATHER = "weather"
EVENT_TRAFFIC = "traffic"

# Feature space for the rarity norm: obs_prev, one-hot(action)/sqrt(|A|),
# obs_post.  Two distinct one-hot blocks differ by sqrt(2/|A|).
FEAT_LEN = OBS_LEN + N_ACTION_KINDS + OBS_LEN
FEAT_D_MAX = math.sqrt(OBS_D_MAX**2 + 2.0 / N_ACTION_KINDS + OBS_D_MAX**2)
_ONEHOT_SCALE = 1.0 / math.sqrt(N_ACTION_KINDS)


@dataclass
class MemoryParams:
    """Collective-memory construction and decay parameters."""

    gamma: float = 0.8
    theta_value: float = 0.9
    theta_rare: float = 0.6
    k: int = 4000
    lam: float = 0.9
    discard_floor: float = 0.1
    steps_per_day: int = 360

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if not (0.0 < self.lam < 1.0):
            raise ValueError("lam must be in (0, 1)")
        if self.k < 0:
            raise ValueError("k must be nonnegative")


@dataclass
class MemoryItem:
    """One recorded experience.

    usage_count starts at 1: creation counts as the first use, successful iff
    the creating step's reward was positive.  This keeps the success ratio
    defined before any replay.
    """

    kind: str
    event_type: str
    t0: int
    x: int
    y: int
    obs_prev: np.ndarray
    action: int
    obs_post: np.ndarray
    reward: float
    delta: float
    owner: int
    usage_count: int = 1
    success_count: int = 0
    schema_version: int = OBS_SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.usage_count < 1:
            raise ValueError("usage_count must be >= 1")
        if self.success_count > self.usage_count:
            raise ValueError("success_count cannot exceed usage_count")


def make_item(
    *,
    t0: int,
    x: int,
    y: int,
    obs_prev: np.ndarray,
    action: int,
    obs_post: np.ndarray,
    reward: float,
    delta: float,
    owner: int,
    event_type: str = EVENT_DELIVERY,
) -> MemoryItem:
    return MemoryItem(
        kind=SHORT_TERM,
        event_type=event_type,
        t0=t0,
        x=x,
        y=y,
        obs_prev=obs_prev,
        action=action,
        obs_post=obs_post,
        reward=reward,
        delta=delta,
        owner=owner,
        usage_count=1,
        success_count=1 if reward > 0 else 0,
    )


def feature_vector(item: MemoryItem) -> np.ndarray:
    vec = np.zeros(FEAT_LEN)
    vec[:OBS_LEN] = item.obs_prev
    vec[OBS_LEN + item.action] = _ONEHOT_SCALE
    vec[OBS_LEN + N_ACTION_KINDS:] = item.obs_post
    return vec


def decay_weights(t0: np.ndarray, now: int, lam: float, steps_per_day: int) -> np.ndarray:
    age_days = (now - np.asarray(t0, dtype=float)) / steps_per_day
    return np.power(lam, age_days)


class ArrayStore:
    """Item collection mirrored into numpy arrays for vectorized scoring.

    The arrays are the fast path; the MemoryItem objects remain the API
    surface.  Counter updates go through mark_usage so both stay in sync.
    """

    def __init__(self, with_features: bool = False) -> None:
        self.items: list[MemoryItem] = []
        self._with_features = with_features
        self._cap = 64
        self._n = 0
        self._insertions = 0
        self._alloc()

    def _alloc(self) -> None:
        c = self._cap
        self._obs_prev = np.empty((c, OBS_LEN))
        self._feat = np.empty((c, FEAT_LEN)) if self._with_features else None
        self._t0 = np.empty(c, dtype=np.int64)
        self._owner = np.empty(c, dtype=np.int64)
        self._action = np.empty(c, dtype=np.int64)
        self._delta_abs = np.empty(c)
        self._usage = np.empty(c, dtype=np.int64)
        self._success = np.empty(c, dtype=np.int64)
        self._ins = np.empty(c, dtype=np.int64)

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        old = (self._obs_prev, self._feat, self._t0, self._owner, self._action,
               self._delta_abs, self._usage, self._success, self._ins)
        self._cap *= 2
        self._alloc()
        n = self._n
        for new, prev in zip(
            (self._obs_prev, self._feat, self._t0, self._owner, self._action,
             self._delta_abs, self._usage, self._success, self._ins),
            old,
        ):
            if new is not None:
                new[:n] = prev[:n]

    def append(self, item: MemoryItem) -> int:
        if self._n == self._cap:
            self._grow()
        i = self._n
        self.items.append(item)
        self._obs_prev[i] = item.obs_prev
        if self._feat is not None:
            self._feat[i] = feature_vector(item)
        self._t0[i] = item.t0
        self._owner[i] = item.owner
        self._action[i] = item.action
        self._delta_abs[i] = abs(item.delta)
        self._usage[i] = item.usage_count
        self._success[i] = item.success_count
        self._ins[i] = self._insertions
        self._insertions += 1
        self._n = i + 1
        return i

    # Trimmed array views (do not mutate through these).
    @property
    def obs_prev(self) -> np.ndarray:
        return self._obs_prev[: self._n]

    @property
    def feat(self) -> np.ndarray:
        return self._feat[: self._n]

    @property
    def t0(self) -> np.ndarray:
        return self._t0[: self._n]

    @property
    def owner(self) -> np.ndarray:
        return self._owner[: self._n]

    @property
    def action(self) -> np.ndarray:
        return self._action[: self._n]

    @property
    def delta_abs(self) -> np.ndarray:
        return self._delta_abs[: self._n]

    @property
    def insertion(self) -> np.ndarray:
        return self._ins[: self._n]

    def success_ratio(self) -> np.ndarray:
        n = self._n
        return self._success[:n] / self._usage[:n]

    def mark_usage(self, idx: int, outcome_positive: bool) -> None:
        mark_usage(self.items[idx], outcome_positive)
        self._usage[idx] += 1
        if outcome_positive:
            self._success[idx] += 1

    def keep(self, mask: np.ndarray) -> int:
        """Retain items where mask is True; returns the number removed."""
        n = self._n
        removed = int(n - np.count_nonzero(mask))
        if removed == 0:
            return 0
        keep_idx = np.flatnonzero(mask)
        self.items = [self.items[i] for i in keep_idx]
        for arr in (self._obs_prev, self._feat, self._t0, self._owner,
                    self._action, self._delta_abs, self._usage, self._success,
                    self._ins):
            if arr is not None:
                arr[: len(keep_idx)] = arr[keep_idx]
        self._n = len(keep_idx)
        return removed


class IndividualStore(ArrayStore):
    """An agent's private experience record plus its long-term objective."""

    def __init__(self, owner: int, long_term_goal: str = "maximize_profit") -> None:
        super().__init__(with_features=False)
        self.owner_id = owner
        self.long_term_goal = long_term_goal


class BufferPool:
    """Per-step staging area collecting all agents' new items."""

    def __init__(self) -> None:
        self.items: list[MemoryItem] = []

    def __len__(self) -> int:
        return len(self.items)

    def clear(self) -> None:
        self.items.clear()


class CollectiveStore(ArrayStore):
    """Bounded, admission-filtered cross-agent store."""

    def __init__(self, capacity: int = 4000) -> None:
        super().__init__(with_features=True)
        self.capacity = capacity
        self.admission_log: list[tuple[int, float, float]] = []  # (step, |delta|, rarity)


def record(item: MemoryItem, individual: IndividualStore, buffer: BufferPool) -> None:
    """Store a fresh item in its owner's individual set and the buffer pool."""
    individual.append(item)
    buffer.items.append(item)


def value_error(v_now: float, v_next: float, gamma: float) -> float:
    """Discounted one-step value difference: gamma * v_next - v_now."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must be in (0, 1]")
    return gamma * v_next - v_now


def rarity(item: MemoryItem, shared: CollectiveStore) -> float:
    """Normalized distance from the item to its nearest collective neighbor.

    An empty collective store yields maximal rarity 1.0 so the first item can
    bootstrap the store.
    """
    if len(shared) == 0:
        return 1.0
    diff = shared.feat - feature_vector(item)
    d = math.sqrt(float(np.min(np.einsum("ij,ij->i", diff, diff))))
    return min(d / FEAT_D_MAX, 1.0)


def admit(buffer: BufferPool, shared: CollectiveStore, params: MemoryParams,
          now: int = 0) -> list[MemoryItem]:
    """Move qualifying buffer items into the collective store and flush.

    Rarity is evaluated against the store as it stood on entry, so the result
    is independent of buffer order.
    """
    cand = buffer.items
    if not cand:
        return []
    if len(shared) == 0:
        rar = np.ones(len(cand))
    else:
        feats = np.stack([feature_vector(m) for m in cand])
        base = shared.feat
        d2 = (
            np.sum(feats**2, axis=1)[:, None]
            + np.sum(base**2, axis=1)[None, :]
            - 2.0 * feats @ base.T
        )
        rar = np.minimum(np.sqrt(np.maximum(np.min(d2, axis=1), 0.0)) / FEAT_D_MAX, 1.0)
    admitted: list[MemoryItem] = []
    for m, r in zip(cand, rar):
        if abs(m.delta) > params.theta_value or r > params.theta_rare:
            shared.append(m)
            shared.admission_log.append((now, abs(m.delta), float(r)))
            admitted.append(m)
    buffer.clear()
    return admitted


def score(item: MemoryItem, now: int, params: MemoryParams) -> float:
    """Retention score: |delta| + success ratio + decay weight."""
    age_days = (now - item.t0) / params.steps_per_day
    return (
        abs(item.delta)
        + item.success_count / item.usage_count
        + params.lam**age_days
    )


def score_store(store: ArrayStore, now: int, params: MemoryParams) -> np.ndarray:
    return (
        store.delta_abs
        + store.success_ratio()
        + decay_weights(store.t0, now, params.lam, params.steps_per_day)
    )


def prune(shared: CollectiveStore, now: int, params: MemoryParams) -> int:
    """Retain the top min(k, n) items by score.

    Ties break toward newer t0, then lower owner id, then insertion order.
    Returns the number of items removed.
    """
    n = len(shared)
    k = min(params.k, n)
    if n <= params.k:
        return 0
    s = score_store(shared, now, params)
    order = np.lexsort((shared.insertion, shared.owner, -shared.t0, -s))
    keep = np.zeros(n, dtype=bool)
    keep[order[:k]] = True
    return shared.keep(keep)


def decay_sweep(store: ArrayStore, now: int, params: MemoryParams) -> int:
    """Discard short-term items whose decay weight fell below the floor.

    Long-term entries (the objective tag on the individual store) never decay.
    Returns the number of discarded items.
    """
    n = len(store)
    if n == 0:
        return 0
    w = decay_weights(store.t0, now, params.lam, params.steps_per_day)
    return store.keep(w >= params.discard_floor)


def oldest_surviving_t0(now: int, params: MemoryParams) -> float:
    """Creation step before which short-term items are guaranteed discarded."""
    horizon_days = math.log(params.discard_floor) / math.log(params.lam)
    return now - horizon_days * params.steps_per_day


def mark_usage(item: MemoryItem, outcome_positive: bool) -> None:
    """Count a replay of the memorized action; success iff its step paid off."""
    item.usage_count += 1
    if outcome_positive:
        item.success_count += 1


def snapshot_lines(stores: Iterable[ArrayStore]) -> list[str]:
    """Line-delimited export, one JSON record per item."""
    out = []
    for store in stores:
        for item in store.items:
            out.append(json.dumps({
                "kind": item.kind,
                "event_type": item.event_type,
                "t0": item.t0,
                "location": [item.x, item.y],
                "obs_prev": [round(v, 9) for v in item.obs_prev.tolist()],
                "action": item.action,
                "obs_post": [round(v, 9) for v in item.obs_post.tolist()],
                "reward": item.reward,
                "delta": item.delta,
                "usage_count": item.usage_count,
                "success_count": item.success_count,
                "owner": item.owner,
            }, separators=(",", ":")))
    return out
