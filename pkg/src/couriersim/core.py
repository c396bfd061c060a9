"""Scenario-agnostic agent abstraction.

Defines the seven-element agent tuple, the discrete action vocabulary, the
action triple used for replay checks, and the step contract mapping
state x percept x memory to action x new state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

# ---------------------------------------------------------------------------
# Action vocabulary.  The order is fixed: it defines Q-table columns, the
# one-hot block of memory feature vectors, and deterministic tie-breaking.

MOVE_N = 0
MOVE_NE = 1
MOVE_E = 2
MOVE_SE = 3
MOVE_S = 4
MOVE_SW = 5
MOVE_W = 6
MOVE_NW = 7
STAY = 8
ACCEPT = 9
REST = 10
RELOCATE = 11

N_ACTION_KINDS = 12

ACTION_NAMES = [
    "move_N", "move_NE", "move_E", "move_SE",
    "move_S", "move_SW", "move_W", "move_NW",
    "stay", "accept_order", "begin_rest", "relocate",
]

# Unit direction (dx, dy) per move kind; north is +y, east is +x.
MOVE_DIRS = {
    MOVE_N: (0, 1),
    MOVE_NE: (1, 1),
    MOVE_E: (1, 0),
    MOVE_SE: (1, -1),
    MOVE_S: (0, -1),
    MOVE_SW: (-1, -1),
    MOVE_W: (-1, 0),
    MOVE_NW: (-1, 1),
}

MOVE_KINDS = tuple(MOVE_DIRS)


@dataclass(frozen=True)
class Action:
    """One concrete agent action: a kind plus its bound target.

    ``target`` is an order id for accept_order, a region index for
    relocate, and None otherwise.
    """

    kind: int
    target: Optional[int] = None

    @property
    def name(self) -> str:
        return ACTION_NAMES[self.kind]


NOOP = Action(STAY)


@dataclass(frozen=True)
class StaticProfile:
    """Immutable agent attributes."""

    agent_id: int
    speed: float = 10.0
    scope: float = 100.0
    survival_cost: float = 10.0
    learning: str = "rule"


@dataclass
class DynamicState:
    """Mutable per-agent state; returned by transitions, never shared."""

    x: int
    y: int
    status: int = 0  # 0 inactive, 1 idle, 2 delivering
    earning: float = 0.0
    window_start: int = 0  # step-of-day where the daily working block begins
    preferred_region: int = 0
    active_steps_today: int = 0
    changes_today: int = 0
    resting: bool = False


@dataclass
class PerceptSet:
    """What an agent sees this step, derived from the frozen world snapshot."""

    tod: int
    order_ids: np.ndarray  # perceivable alive unassigned orders, by id
    order_dists: np.ndarray
    nearest_order: Optional[int]
    nearest_dist: Optional[float]
    proposed_order: Optional[int]
    co_located: list[int]
    region_density: np.ndarray  # alive unassigned order count per region
    congestion_in_scope: bool
    weather: bool
    has_path: bool  # agent currently follows a planned route
    next_path_move: Optional[int]  # move kind along that route


@dataclass(frozen=True)
class ActionTriple:
    """Logged transition: applying ``op`` to ``start`` must reproduce ``end``."""

    start: tuple
    op: Action
    end: tuple


@dataclass
class ConstraintSet:
    """Limits checked at action emission time."""

    daily_active_budget: int = 120
    daily_change_budget: int = 2


@dataclass
class AgentTuple:
    """The seven-element agent: statics, dynamics, percepts, decision binding,
    actions, memory handle, and constraints."""

    statics: StaticProfile
    dynamics: DynamicState
    percepts: Optional[PerceptSet] = None
    decision: Optional[Callable] = None  # bound collaborative-decision function
    actions: tuple = tuple(range(N_ACTION_KINDS))
    memory: Optional[object] = None  # individual store handle
    constraints: ConstraintSet = field(default_factory=ConstraintSet)


@dataclass
class StepOutcome:
    action: Action
    dynamics: DynamicState
    record: Optional[object]  # DecisionRecord when a gated decision was made


def step_agent(
    agent: AgentTuple,
    obs: np.ndarray,
    percept: PerceptSet,
    collective,
    now: int,
    params,
    rng,
    policy_fn: Callable,
    constrain_fn: Callable,
    transition_fn: Callable,
) -> StepOutcome:
    """Run one decision step: policy, memory gate, constraints, transition.

    Pure over its inputs; the returned DynamicState is a fresh copy.  When no
    legal action is available the designated no-op (stay) is returned; this
    function never raises for lack of options.
    """
    from .decision import decide

    learning_kind = policy_fn(agent, obs, percept, rng)
    record = decide(obs, learning_kind, collective, now, params, owner=agent.statics.agent_id)
    action = constrain_fn(agent, Action(record.chosen_action), percept)
    new_dyn = transition_fn(agent, action, percept)
    return StepOutcome(action=action, dynamics=new_dyn, record=record)


def apply_move(x: int, y: int, kind: int, budget: float, width: int, height: int,
               blocked=None) -> tuple[int, int]:
    """Advance from (x, y) in a move direction until the path-cost budget runs
    out, clamping at map bounds and stopping before blocked cells.

    Straight steps cost 1, diagonal steps sqrt(2).  Used both by the live
    simulation and by triple replay, so it must stay pure.
    """
    dx, dy = MOVE_DIRS[kind]
    step_cost = 2**0.5 if dx != 0 and dy != 0 else 1.0
    spent = 0.0
    while spent + step_cost <= budget + 1e-9:
        nx, ny = x + dx, y + dy
        if not (0 <= nx < width and 0 <= ny < height):
            break
        if blocked is not None and blocked(nx, ny):
            break
        x, y = nx, ny
        spent += step_cost
    return x, y


def replay_triple(triple: ActionTriple, width: int, height: int,
                  budget: float = 10.0) -> tuple:
    """Re-apply a logged move/stay op to its start state.

    Start/end states are (x, y) pairs for movement ops; stay maps a state to
    itself.  Returns the recomputed end state for comparison with the log.
    """
    x, y = triple.start
    if triple.op.kind in MOVE_DIRS:
        return apply_move(x, y, triple.op.kind, budget, width, height)
    return (x, y)


def clone_dynamics(dyn: DynamicState) -> DynamicState:
    return replace(dyn)
