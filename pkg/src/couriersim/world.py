"""The urban instant-delivery artificial society.

Grid environment, order lifecycle and generation, platform assignment,
delivery-agent dynamics and constraints, congestion/weather events, the
scenario state-value function, and the fixed-phase step loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import memory as mem
from .core import (ACCEPT, MOVE_DIRS, N_ACTION_KINDS, REST, RELOCATE, STAY,
                   Action, ActionTriple, PerceptSet, StaticProfile, apply_move)
from .decision import (CredibilityParams, DecisionRecord,
                       batched_memory_candidates, decide)
from .observation import build_observation
from .pathing import (SQRT2, CongestionRect, GridMap, line_path, octile,
                      path_cost, plan_path)
from .policies import (ImitationDataset, QTable, discretize, epsilon_schedule,
                       imitation_policy, observe_expert, q_policy, q_update,
                       rule_policy, scripted_policy)

ALIVE, CAPTURED, DELIVERED, DEAD = 0, 1, 2, 3
STATUS_NAMES = {ALIVE: "alive", CAPTURED: "captured", DELIVERED: "delivered", DEAD: "dead"}

_DIR_TO_KIND = {v: k for k, v in MOVE_DIRS.items()}

# Worst-case path-cost progress per step is just above speed - sqrt(2); the
# conservative divisor keeps window-feasibility estimates safe.
_PROGRESS_FLOOR = 8.5


@dataclass
class GeneratorParams:
    """Fifth-order Gaussian order-generation parameters plus volume scale."""

    a: tuple = (314.2, 188.3, 95.56, 22.9, 48.67)
    b: tuple = (172.5, 281.5, 315.5, 228.9, 267.1)
    c: tuple = (4.645, 1.559, 10.69, 167.7, 13.1)
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if any(ci <= 0 for ci in self.c):
            raise ValueError("generator widths c_i must be positive")


def gn(x, params: GeneratorParams):
    """Sum of five Gaussian bumps over the time-of-day step index."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for a_i, b_i, c_i in zip(params.a, params.b, params.c):
        total += a_i * np.exp(-(((x - b_i) / c_i) ** 2))
    return total if total.ndim else float(total)


def time_weight(tod: int, steps_per_day: int = 360) -> float:
    """1.0 for orders generated 08:00-22:00, 1.5 for nighttime orders."""
    day_start = steps_per_day * 8 // 24
    day_end = steps_per_day * 22 // 24
    return 1.0 if day_start <= tod < day_end else 1.5


def order_value(sx: int, sy: int, ex: int, ey: int, tod: int,
                steps_per_day: int = 360) -> float:
    """Path distance on the congestion-free map times the time weight."""
    return octile(sx, sy, ex, ey) * time_weight(tod, steps_per_day)


def order_lifespan(sx: int, sy: int, ex: int, ey: int, speed: float = 10.0) -> int:
    """Twice the minimal travel time plus slack."""
    return math.ceil(2.0 * octile(sx, sy, ex, ey) / speed) + 30


@dataclass
class Order:
    """Dataclass view of one order (the book stores orders column-wise)."""

    order_id: int
    start: tuple[int, int]
    end: tuple[int, int]
    status: str
    value: float
    t_start: int
    t_alive: int
    assigned_to: Optional[int]


class OrderBook:
    """Column-oriented order storage sized for fast per-step filtering."""

    def __init__(self) -> None:
        self._cap = 256
        self.n = 0
        self._alloc()

    def _alloc(self) -> None:
        c = self._cap
        self.sx = np.empty(c, dtype=np.int64)
        self.sy = np.empty(c, dtype=np.int64)
        self.ex = np.empty(c, dtype=np.int64)
        self.ey = np.empty(c, dtype=np.int64)
        self.value = np.empty(c)
        self.t_start = np.empty(c, dtype=np.int64)
        self.t_alive = np.empty(c, dtype=np.int64)
        self.status = np.empty(c, dtype=np.int8)
        self.assigned = np.empty(c, dtype=np.int64)

    def _grow(self) -> None:
        old = (self.sx, self.sy, self.ex, self.ey, self.value,
               self.t_start, self.t_alive, self.status, self.assigned)
        self._cap *= 2
        self._alloc()
        for new, prev in zip((self.sx, self.sy, self.ex, self.ey, self.value,
                              self.t_start, self.t_alive, self.status,
                              self.assigned), old):
            new[: self.n] = prev[: self.n]

    def add(self, sx: int, sy: int, ex: int, ey: int, value: float,
            t_start: int, t_alive: int) -> int:
        if self.n == self._cap:
            self._grow()
        i = self.n
        self.sx[i], self.sy[i], self.ex[i], self.ey[i] = sx, sy, ex, ey
        self.value[i] = value
        self.t_start[i] = t_start
        self.t_alive[i] = t_alive
        self.status[i] = ALIVE
        self.assigned[i] = -1
        self.n = i + 1
        return i

    def view(self, i: int) -> Order:
        return Order(
            order_id=i,
            start=(int(self.sx[i]), int(self.sy[i])),
            end=(int(self.ex[i]), int(self.ey[i])),
            status=STATUS_NAMES[int(self.status[i])],
            value=float(self.value[i]),
            t_start=int(self.t_start[i]),
            t_alive=int(self.t_alive[i]),
            assigned_to=int(self.assigned[i]) if self.assigned[i] >= 0 else None,
        )


def assign_orders(order_pos: np.ndarray, agent_pos: np.ndarray,
                  scope: float,
                  feasible: Optional[np.ndarray] = None) -> list[tuple[int, int]]:
    """Minimum-cost matching between orders and idle agents.

    Cost is the path distance from the agent to the order start; pairs beyond
    the perception scope (or marked infeasible) are ineligible.  Among
    maximum-cardinality matchings on the eligible graph, total cost is
    minimal.  Returns (order_row, agent_row) pairs.
    """
    m, n = len(order_pos), len(agent_pos)
    if m == 0 or n == 0:
        return []
    dx = np.abs(order_pos[:, 0][:, None] - agent_pos[:, 0][None, :])
    dy = np.abs(order_pos[:, 1][:, None] - agent_pos[:, 1][None, :])
    lo = np.minimum(dx, dy)
    cost = (np.maximum(dx, dy) - lo) + SQRT2 * lo
    eligible = cost <= scope
    if feasible is not None:
        eligible &= feasible
    if not eligible.any():
        return []
    big = cost.max() * (m + n + 1) + 1.0
    padded = np.where(eligible, cost, big)
    rows, cols = linear_sum_assignment(padded)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if eligible[r, c]]


@dataclass
class StateValueInputs:
    l_best: float
    l_rest: float
    l_past: float
    n_orders_in_scope: int
    status_now: int
    status_prev: int
    order_active: bool = True


def state_value(inputs: StateValueInputs, scope: float) -> float:
    """Scenario state value: progress-weighted status change plus local
    order density.  The first term is zero when no order is active."""
    term = 0.0
    if inputs.order_active:
        denom = inputs.l_rest + inputs.l_past
        diff = inputs.status_now - inputs.status_prev
        term = (inputs.l_best / denom) * diff if denom > 0 else float(diff)
    return term + inputs.n_orders_in_scope / scope**2


@dataclass
class _Route:
    """A committed route: current leg cells plus remaining waypoints."""

    leg: list[tuple[int, int]]
    ptr: int
    leg_rest: float  # remaining cost on the current leg
    next_goal: Optional[tuple[int, int]]  # second waypoint (order end) or None


@dataclass
class AgentRuntime:
    statics: StaticProfile
    x: int
    y: int
    window_start: int
    rng: np.random.Generator
    status: int = 0
    earning: float = 0.0
    preferred_region: int = 0
    active_steps_today: int = 0
    changes_today: int = 0
    resting: bool = False

    order_id: int = -1  # order being delivered (-1 none)
    picked_up: bool = False
    l_best: float = 0.0
    l_past: float = 0.0
    route: Optional[_Route] = None
    roam: Optional[_Route] = None  # relocation commitment
    just_delivered: bool = False

    proposed_order: int = -1
    last_obs: Optional[np.ndarray] = None
    last_action: int = STAY
    v_now: float = 0.0
    v_prev: float = 0.0
    status_prev: int = 0
    pending_item: Optional[tuple] = None  # staged item fields awaiting delta
    q_pending: Optional[list] = None  # [state, action, accumulated reward]

    # day accumulators
    day_start_earning: float = 0.0
    day_orders: int = 0
    day_effective: int = 0
    day_dec_memory: int = 0
    day_dec_learning: int = 0

    # run totals for the accounting identity
    total_delivered_value: float = 0.0
    total_active_steps: int = 0


@dataclass
class _Pending:
    """Phase-5 staging for one agent, applied in phase 6."""

    agent_id: int
    obs: Optional[np.ndarray] = None
    percept: Optional[PerceptSet] = None
    action: Optional[Action] = None
    record: Optional[DecisionRecord] = None
    decided: bool = False  # made a gated decision this step


class Simulation:
    """Deterministic fixed-phase step loop over the artificial society."""

    def __init__(self, config) -> None:
        self.cfg = config
        self.grid = GridMap(config.width, config.height)
        self.spd = config.steps_per_day
        self.mem_params = config.memory_params()
        self.cred_params = config.credibility_params()
        self.gen_params = config.generator_params()
        self.script = config.script_config()

        ss = np.random.SeedSequence(config.seed)
        children = ss.spawn(3 + config.n_agents)
        self.world_rng = np.random.Generator(np.random.PCG64(children[0]))
        self.weather_rng = np.random.Generator(np.random.PCG64(children[1]))
        self.congestion_rng = np.random.Generator(np.random.PCG64(children[2]))

        learnings = config.learning_per_agent()
        self.agents: list[AgentRuntime] = []
        for i in range(config.n_agents):
            rng = np.random.Generator(np.random.PCG64(children[3 + i]))
            ag = AgentRuntime(
                statics=StaticProfile(agent_id=i, speed=config.speed,
                                      scope=config.scope,
                                      survival_cost=config.survival_cost,
                                      learning=learnings[i]),
                x=int(rng.integers(config.width)),
                y=int(rng.integers(config.height)),
                window_start=int(rng.integers(self.spd)),
                rng=rng,
            )
            ag.preferred_region = self.grid.region_of(ag.x, ag.y)
            self.agents.append(ag)

        self.orders = OrderBook()
        self.order_day: list[int] = []  # generation day per order

        self.memory_model = config.memory_model
        self.individual = {a.statics.agent_id: mem.IndividualStore(a.statics.agent_id)
                           for a in self.agents}
        self.buffer = mem.BufferPool()
        self.collective = mem.CollectiveStore(self.mem_params.k)
        self.pool = mem.ArrayStore()  # global pool for episodic/replay baselines

        self.qtable = QTable()
        self.datasets = {a.statics.agent_id: ImitationDataset() for a in self.agents}

        self.weather_rain = False
        self.step_index = 0

        self.gate_violations = 0
        self.decision_log: Optional[list[str]] = [] if config.decision_log else None
        self.triple_log: Optional[list] = [] if config.log_triples else None

        self.agent_rows: list[tuple] = []
        self.system_rows: list[tuple] = []
        self._day_generated = 0
        self._day_delivered = 0
        self._day_expired = 0

    # ------------------------------------------------------------------
    # perception

    def _perceivable(self) -> np.ndarray:
        ob = self.orders
        return np.flatnonzero((ob.status[: ob.n] == ALIVE) & (ob.assigned[: ob.n] < 0))

    def perceive(self, ag: AgentRuntime, perceivable: np.ndarray,
                 pos_index: dict, region_density: np.ndarray, tod: int) -> PerceptSet:
        ob = self.orders
        scope = ag.statics.scope
        ids = perceivable
        if ag.proposed_order >= 0:
            ids = np.append(ids, ag.proposed_order)
        if len(ids):
            dx = np.abs(ob.sx[ids] - ag.x)
            dy = np.abs(ob.sy[ids] - ag.y)
            lo = np.minimum(dx, dy)
            d = (np.maximum(dx, dy) - lo) + SQRT2 * lo
            in_scope = d <= scope
            ids, d = ids[in_scope], d[in_scope]
        else:
            d = np.empty(0)
        if len(ids):
            j = int(np.argmin(d))
            nearest, nearest_dist = int(ids[j]), float(d[j])
        else:
            nearest, nearest_dist = None, None
        co = [a for a in pos_index.get((ag.x, ag.y), ())
              if a != ag.statics.agent_id]
        congested = any(
            self._rect_dist(r, ag.x, ag.y) <= scope for r in self.grid.rects
        )
        nxt = None
        route = ag.route or ag.roam
        if route is not None and route.ptr < len(route.leg):
            cx, cy = route.leg[route.ptr]
            nxt = _DIR_TO_KIND.get(
                (int(np.sign(cx - ag.x)), int(np.sign(cy - ag.y)))
            )
        return PerceptSet(
            tod=tod,
            order_ids=ids,
            order_dists=d,
            nearest_order=nearest,
            nearest_dist=nearest_dist,
            proposed_order=ag.proposed_order if ag.proposed_order >= 0 else None,
            co_located=co,
            region_density=region_density,
            congestion_in_scope=congested,
            weather=self.weather_rain,
            has_path=route is not None,
            next_path_move=nxt,
        )

    @staticmethod
    def _rect_dist(rect: CongestionRect, x: int, y: int) -> float:
        cx = min(max(x, rect.x0), rect.x1)
        cy = min(max(y, rect.y0), rect.y1)
        return octile(x, y, cx, cy)

    def _observe(self, ag: AgentRuntime, percept: PerceptSet) -> np.ndarray:
        return build_observation(
            ag.x, ag.y, self.grid.width, self.grid.height, ag.status,
            percept.tod, self.spd, len(percept.order_ids),
            percept.nearest_dist, ag.statics.scope,
            percept.congestion_in_scope, percept.weather,
        )

    # ------------------------------------------------------------------
    # constraints

    def _remaining_window(self, ag: AgentRuntime, tod: int) -> int:
        elapsed = (tod - ag.window_start) % self.spd
        return max(self.cfg.daily_active_budget - elapsed, 0)

    def _accept_target(self, ag: AgentRuntime, percept: PerceptSet) -> Optional[int]:
        if percept.proposed_order is not None:
            return percept.proposed_order
        return percept.nearest_order

    def _accept_feasible(self, ag: AgentRuntime, oid: int, tod: int) -> bool:
        ob = self.orders
        if ob.status[oid] != ALIVE:
            return False
        if ob.assigned[oid] not in (-1, ag.statics.agent_id):
            return False
        d_to = octile(ag.x, ag.y, int(ob.sx[oid]), int(ob.sy[oid]))
        if d_to > ag.statics.scope:
            return False
        total = d_to + octile(int(ob.sx[oid]), int(ob.sy[oid]),
                              int(ob.ex[oid]), int(ob.ey[oid]))
        est = math.ceil(total / _PROGRESS_FLOOR) + 1
        if est > self._remaining_window(ag, tod):
            return False
        remaining_life = int(ob.t_alive[oid]) - (self.step_index - int(ob.t_start[oid]))
        return est <= remaining_life

    def apply_constraints(self, ag: AgentRuntime, kind: int,
                          percept: PerceptSet) -> Action:
        """Degrade illegal actions to stay; bind targets for legal ones."""
        if kind in MOVE_DIRS:
            dx, dy = MOVE_DIRS[kind]
            nx, ny = ag.x + dx, ag.y + dy
            if not self.grid.in_bounds(nx, ny) or self.grid.blocked(nx, ny):
                return Action(STAY)
            return Action(kind)
        if kind == ACCEPT:
            oid = self._accept_target(ag, percept)
            if oid is None or not self._accept_feasible(ag, oid, percept.tod):
                return Action(STAY)
            return Action(ACCEPT, oid)
        if kind == REST:
            if ag.changes_today >= self.cfg.daily_change_budget or ag.resting:
                return Action(STAY)
            return Action(REST)
        if kind == RELOCATE:
            if ag.changes_today >= self.cfg.daily_change_budget:
                return Action(STAY)
            dens = percept.region_density
            return Action(RELOCATE, int(np.argmax(dens)))
        return Action(STAY)

    def _legal_mask(self, ag: AgentRuntime, percept: PerceptSet) -> np.ndarray:
        legal = np.ones(N_ACTION_KINDS, dtype=bool)
        target = self._accept_target(ag, percept)
        legal[ACCEPT] = target is not None
        legal[REST] = ag.changes_today < self.cfg.daily_change_budget and not ag.resting
        legal[RELOCATE] = ag.changes_today < self.cfg.daily_change_budget
        return legal

    # ------------------------------------------------------------------
    # phases

    def world_step(self, t: int) -> None:
        self.step_index = t
        tod = t % self.spd
        if tod == 0:
            self._start_day(t)
        self._update_events(t, tod)
        self._update_windows(tod)
        self._generate_orders(t, tod)
        self._expire_orders(t)
        self._platform_assign(tod)

        # phase 4: snapshot
        perceivable = self._perceivable()
        region_density = np.zeros(self.grid.N_REGIONS, dtype=np.int64)
        if len(perceivable):
            regions = ((self.orders.sx[perceivable] >= self.grid.width // 2).astype(int)
                       + 2 * (self.orders.sy[perceivable] >= self.grid.height // 2))
            np.add.at(region_density, regions, 1)
        pos_index: dict[tuple[int, int], list[int]] = {}
        for ag in self.agents:
            if ag.status != 0:
                pos_index.setdefault((ag.x, ag.y), []).append(ag.statics.agent_id)

        pendings = self._decide_phase(t, tod, perceivable, region_density, pos_index)
        rewards = self._apply_phase(t, pendings)
        if self.memory_model != "none":
            self._record_phase(t, pendings, rewards)
            self._flush_phase(t)
        self._learning_phase(t, pendings, rewards)
        if tod == self.spd - 1:
            self._end_day(t)

    # -- phase 0 helpers

    def _start_day(self, t: int) -> None:
        for ag in self.agents:
            ag.active_steps_today = 0
            ag.changes_today = 0
            ag.day_start_earning = ag.earning
            ag.day_orders = 0
            ag.day_effective = 0
            ag.day_dec_memory = 0
            ag.day_dec_learning = 0
        self._day_generated = 0
        self._day_delivered = 0
        self._day_expired = 0
        if self.cfg.weather_flip_prob > 0:
            if self.weather_rng.random() < self.cfg.weather_flip_prob:
                self.weather_rain = not self.weather_rain

    def _update_events(self, t: int, tod: int) -> None:
        self.grid.expire_rects(t)
        p = self.cfg.congestion_prob
        if p > 0 and self.congestion_rng.random() < p:
            rng = self.congestion_rng
            w = int(rng.integers(10, 51))
            h = int(rng.integers(10, 51))
            x0 = int(rng.integers(max(self.grid.width - w, 1)))
            y0 = int(rng.integers(max(self.grid.height - h, 1)))
            dur = int(rng.integers(5, 31))
            self.grid.add_rect(CongestionRect(x0, y0, x0 + w - 1, y0 + h - 1, t + dur))

    def _update_windows(self, tod: int) -> None:
        for ag in self.agents:
            in_window = ((tod - ag.window_start) % self.spd) < self.cfg.daily_active_budget
            if in_window:
                if ag.status == 0 and not ag.resting:
                    ag.status = 1
            else:
                ag.resting = False
                if ag.status == 1:
                    ag.status = 0
                    ag.roam = None
                # delivering agents finish their run; acceptance feasibility
                # keeps this overtime to congestion-induced slack only

    # -- phase 1

    def _generate_orders(self, t: int, tod: int) -> None:
        lam = self.gen_params.alpha * gn(tod, self.gen_params)
        count = int(self.world_rng.poisson(lam)) if lam > 0 else 0
        if count == 0:
            return
        rng = self.world_rng
        sx = rng.integers(self.grid.width, size=count)
        sy = rng.integers(self.grid.height, size=count)
        ex = rng.integers(self.grid.width, size=count)
        ey = rng.integers(self.grid.height, size=count)
        w = time_weight(tod, self.spd)
        for i in range(count):
            d = octile(int(sx[i]), int(sy[i]), int(ex[i]), int(ey[i]))
            self.orders.add(int(sx[i]), int(sy[i]), int(ex[i]), int(ey[i]),
                            d * w, t, math.ceil(2.0 * d / self.cfg.speed) + 30)
            self.order_day.append(t // self.spd)
        self._day_generated += count

    # -- phase 2

    def _expire_orders(self, t: int) -> None:
        ob = self.orders
        n = ob.n
        live = (ob.status[:n] == ALIVE) | (ob.status[:n] == CAPTURED)
        expired = live & ((t - ob.t_start[:n]) > ob.t_alive[:n])
        idx = np.flatnonzero(expired)
        if not len(idx):
            return
        for oid in idx:
            carrier = int(ob.assigned[oid])
            ob.status[oid] = DEAD
            ob.assigned[oid] = -1
            if carrier >= 0:
                ag = self.agents[carrier]
                if ag.order_id == oid:
                    self._clear_delivery(ag)
        self._day_expired += len(idx)

    def _clear_delivery(self, ag: AgentRuntime) -> None:
        ag.order_id = -1
        ag.picked_up = False
        ag.route = None
        ag.l_best = 0.0
        ag.l_past = 0.0
        if ag.status == 2:
            ag.status = 1

    # -- phase 3

    def _platform_assign(self, tod: int) -> None:
        for ag in self.agents:
            if ag.proposed_order >= 0:
                self.orders.assigned[ag.proposed_order] = -1
                ag.proposed_order = -1
        ob = self.orders
        unassigned = self._perceivable()
        idle = [ag for ag in self.agents if ag.status == 1]
        if not len(unassigned) or not idle:
            return
        opos = np.stack([ob.sx[unassigned], ob.sy[unassigned]], axis=1)
        apos = np.array([[ag.x, ag.y] for ag in idle])
        dx = np.abs(opos[:, 0][:, None] - apos[:, 0][None, :])
        dy = np.abs(opos[:, 1][:, None] - apos[:, 1][None, :])
        lo = np.minimum(dx, dy)
        d_to = (np.maximum(dx, dy) - lo) + SQRT2 * lo
        odx = np.abs(ob.sx[unassigned] - ob.ex[unassigned])
        ody = np.abs(ob.sy[unassigned] - ob.ey[unassigned])
        olo = np.minimum(odx, ody)
        run = (np.maximum(odx, ody) - olo) + SQRT2 * olo
        est = np.ceil((d_to + run[:, None]) / _PROGRESS_FLOOR) + 1
        remaining = np.array([self._remaining_window(ag, tod) for ag in idle])
        life = ob.t_alive[unassigned] - (self.step_index - ob.t_start[unassigned])
        feas = (est <= remaining[None, :]) & (est <= life[:, None])
        for r, c in assign_orders(opos, apos, self.cfg.scope, feas):
            oid = int(unassigned[r])
            ag = idle[c]
            ob.assigned[oid] = ag.statics.agent_id
            ag.proposed_order = oid

    # -- phase 5

    def _decide_phase(self, t: int, tod: int, perceivable, region_density,
                      pos_index) -> list[_Pending]:
        pendings = [_Pending(agent_id=ag.statics.agent_id) for ag in self.agents]

        def perceive_one(i: int) -> None:
            ag = self.agents[i]
            if ag.status == 0:
                return
            p = self.perceive(ag, perceivable, pos_index, region_density, tod)
            pendings[i].percept = p
            pendings[i].obs = self._observe(ag, p)

        self._map_agents(perceive_one)

        # batched memory retrieval for idle deciders
        deciders = [i for i, ag in enumerate(self.agents)
                    if ag.status == 1 and not (ag.roam and ag.proposed_order < 0)]
        best_by_agent: dict[int, Optional[tuple]] = {}
        if self.memory_model != "none" and deciders:
            obs_matrix = np.stack([pendings[i].obs for i in deciders])
            if self.memory_model == "mmdm":
                cands = batched_memory_candidates(
                    obs_matrix, self.collective, t, self.cred_params, "credibility")
            elif self.memory_model == "episodic":
                owners = self.pool.owner if len(self.pool) else np.empty(0, dtype=np.int64)
                cands = batched_memory_candidates(
                    obs_matrix, self.pool, t, self.cred_params, "baseline",
                    owners=owners,
                    owner_filter=np.array([self.agents[i].statics.agent_id
                                           for i in deciders]))
            else:  # replay
                cands = batched_memory_candidates(
                    obs_matrix, self.pool, t, self.cred_params, "baseline")
            best_by_agent = dict(zip(deciders, cands))

        def decide_one(i: int) -> None:
            ag = self.agents[i]
            pend = pendings[i]
            if ag.status == 0:
                return
            if ag.status == 2:
                return  # route-following handled in the apply phase
            if ag.roam is not None and ag.proposed_order < 0:
                return  # committed relocation continues
            ag.roam = None  # proposals interrupt relocation
            percept = pend.percept
            learning_kind = self._policy_action(ag, pend.obs, percept, t)
            store = self._active_store()
            rec = decide(pend.obs, learning_kind, store, t, self.cred_params,
                         owner=ag.statics.agent_id,
                         best=best_by_agent.get(i))
            pend.record = rec
            pend.decided = True
            pend.action = self.apply_constraints(ag, rec.chosen_action, percept)

        self._map_agents(decide_one)
        return pendings

    def _map_agents(self, fn) -> None:
        n = len(self.agents)
        if self.cfg.n_threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=self.cfg.n_threads) as pool:
                list(pool.map(fn, range(n)))
        else:
            for i in range(n):
                fn(i)

    def _active_store(self):
        if self.memory_model == "mmdm":
            return self.collective
        if self.memory_model in ("episodic", "replay"):
            return self.pool
        return None

    def _policy_action(self, ag: AgentRuntime, obs, percept, t: int) -> int:
        kind = ag.statics.learning
        if kind == "rule":
            return rule_policy(percept, ag.rng)
        if kind == "imitation":
            return imitation_policy(obs, self.datasets[ag.statics.agent_id],
                                    percept, ag.rng)
        if kind == "qlearning":
            s = self._discrete_state(ag, percept)
            eps = epsilon_schedule(t, self.cfg.steps,
                                   self.cfg.epsilon_start, self.cfg.epsilon_end,
                                   self.cfg.epsilon_anneal_fraction)
            return q_policy(self.qtable, s, eps, ag.rng,
                            self._legal_mask(ag, percept))
        if kind == "scripted":
            return scripted_policy(percept, self.script,
                                   self.cfg.daily_change_budget - ag.changes_today)
        raise ValueError(f"unknown learning type: {kind}")

    def _discrete_state(self, ag: AgentRuntime, percept: PerceptSet) -> int:
        return discretize(self.grid.region_of(ag.x, ag.y), percept.tod,
                          len(percept.order_ids), ag.status, self.spd)

    # -- phase 6

    def _apply_phase(self, t: int, pendings: list[_Pending]) -> dict[int, float]:
        rewards: dict[int, float] = {}
        speed = self.cfg.speed * (0.8 if self.weather_rain else 1.0)
        for i, ag in enumerate(self.agents):
            pend = pendings[i]
            active = ag.status != 0
            ag.status_prev = ag.status
            ag.just_delivered = False
            delivered_value = 0.0
            executed = STAY
            start_pos = (ag.x, ag.y)

            if ag.status == 2:
                executed = pend.percept.next_path_move if pend.percept else STAY
                delivered_value = self._advance_delivery(ag, speed)
            elif ag.status == 1 and ag.roam is not None and pend.action is None:
                executed = pend.percept.next_path_move if pend.percept else STAY
                self._advance_roam(ag, speed)
            elif pend.action is not None:
                executed = pend.action.kind
                delivered_value = self._execute(ag, pend.action, speed)
            if executed is None:
                executed = STAY

            if active:
                ag.earning -= ag.statics.survival_cost
                ag.active_steps_today += 1
                ag.total_active_steps += 1
                if ag.status_prev == 2:
                    ag.day_effective += 1
                reward = delivered_value - ag.statics.survival_cost
            else:
                reward = 0.0
            rewards[i] = reward
            ag.last_action = executed
            if pend.obs is not None:
                ag.last_obs = pend.obs

            if pend.record is not None:
                rec = pend.record
                is_mem = rec.source == "memory"
                if is_mem != (rec.best_credibility > self.cred_params.theta_memory):
                    self.gate_violations += 1
                if is_mem:
                    ag.day_dec_memory += 1
                    if rec.matched_store is not None and rec.matched_index is not None:
                        rec.matched_store.mark_usage(rec.matched_index, reward > 0)
                else:
                    ag.day_dec_learning += 1
                if self.decision_log is not None:
                    self.decision_log.append(rec.to_json())

            if (self.triple_log is not None and pend.action is not None
                    and (pend.action.kind in MOVE_DIRS or pend.action.kind == STAY)
                    and not self.grid.rects):
                # route-following steps can change direction mid-step, so only
                # single-direction policy moves are replayable from the kind
                self.triple_log.append(
                    ActionTriple(start=start_pos, op=Action(executed),
                                 end=(ag.x, ag.y)))

            # state value after effects
            self._update_state_value(ag, pend)
        return rewards

    def _update_state_value(self, ag: AgentRuntime, pend: _Pending) -> None:
        n_scope = len(pend.percept.order_ids) if pend.percept else 0
        if ag.status == 2 or ag.just_delivered:
            l_rest = 0.0
            if ag.route is not None:
                l_rest = ag.route.leg_rest
                if ag.route.next_goal is not None and ag.route.leg:
                    l_rest += octile(*ag.route.leg[-1], *ag.route.next_goal)
            inputs = StateValueInputs(ag.l_best, l_rest, ag.l_past, n_scope,
                                      ag.status, ag.status_prev, True)
        else:
            inputs = StateValueInputs(0.0, 0.0, 0.0, n_scope,
                                      ag.status, ag.status_prev, False)
        ag.v_prev = ag.v_now
        ag.v_now = state_value(inputs, ag.statics.scope)

    def _execute(self, ag: AgentRuntime, action: Action, speed: float) -> float:
        """Apply one bound action; returns value delivered this step."""
        kind = action.kind
        if kind in MOVE_DIRS:
            ag.x, ag.y = apply_move(ag.x, ag.y, kind, speed,
                                    self.grid.width, self.grid.height,
                                    blocked=self.grid.blocked)
        elif kind == ACCEPT:
            oid = action.target
            if self._accept_feasible(ag, oid, self.step_index % self.spd):
                return self._begin_delivery(ag, oid, speed)
        elif kind == REST:
            ag.resting = True
            ag.status = 0
            ag.changes_today += 1
            ag.roam = None
        elif kind == RELOCATE:
            ag.changes_today += 1
            ag.preferred_region = action.target
            cx, cy = self.grid.region_center(action.target)
            leg = line_path(ag.x, ag.y, cx, cy)
            if leg:
                ag.roam = _Route(leg=leg, ptr=0,
                                 leg_rest=path_cost((ag.x, ag.y), leg),
                                 next_goal=None)
                self._advance_roam(ag, speed)
        return 0.0

    def _begin_delivery(self, ag: AgentRuntime, oid: int, speed: float) -> float:
        ob = self.orders
        ob.assigned[oid] = ag.statics.agent_id
        ag.proposed_order = -1
        ag.order_id = oid
        ag.picked_up = False
        ag.status = 2
        ag.roam = None
        start = (int(ob.sx[oid]), int(ob.sy[oid]))
        end = (int(ob.ex[oid]), int(ob.ey[oid]))
        leg, _ = plan_path((ag.x, ag.y), start, self.grid)
        ag.route = _Route(leg=leg, ptr=0, leg_rest=path_cost((ag.x, ag.y), leg),
                          next_goal=end)
        ag.l_best = octile(ag.x, ag.y, *start) + octile(*start, *end)
        ag.l_past = 0.0
        delivered = 0.0
        if not leg:  # already at the pickup cell
            delivered += self._on_waypoint(ag)
        if ag.route is not None:
            delivered += self._advance_delivery(ag, speed)
        return delivered

    def _advance_route(self, ag: AgentRuntime, route: _Route, budget: float) -> float:
        """Move along the route within the path-cost budget; returns spent."""
        spent = 0.0
        x, y = ag.x, ag.y
        while route.ptr < len(route.leg):
            nx, ny = route.leg[route.ptr]
            cost = SQRT2 if (nx != x and ny != y) else 1.0
            if spent + cost > budget + 1e-9:
                break
            if self.grid.blocked(nx, ny):
                if not self._replan(ag, route, (x, y)):
                    break
                continue
            x, y = nx, ny
            spent += cost
            route.ptr += 1
            route.leg_rest -= cost
        ag.x, ag.y = x, y
        return spent

    def _replan(self, ag: AgentRuntime, route: _Route, pos) -> bool:
        goal = route.leg[-1]
        leg, wait = plan_path(pos, goal, self.grid)
        if wait:
            return False
        route.leg = leg
        route.ptr = 0
        route.leg_rest = path_cost(pos, leg)
        return True

    def _advance_delivery(self, ag: AgentRuntime, speed: float) -> float:
        """Advance toward pickup/dropoff; returns value delivered this step."""
        budget = speed
        delivered = 0.0
        while budget > 1e-9 and ag.route is not None:
            spent = self._advance_route(ag, ag.route, budget)
            ag.l_past += spent
            budget -= spent
            if ag.route.ptr >= len(ag.route.leg):
                delivered += self._on_waypoint(ag)
                if ag.route is None:
                    break
            if spent == 0.0:
                break  # blocked: wait here
        return delivered

    def _on_waypoint(self, ag: AgentRuntime) -> float:
        ob = self.orders
        oid = ag.order_id
        if not ag.picked_up:
            ag.picked_up = True
            ob.status[oid] = CAPTURED
            end = ag.route.next_goal
            leg = plan_path((ag.x, ag.y), end, self.grid)[0]
            ag.route = _Route(leg=leg, ptr=0, leg_rest=path_cost((ag.x, ag.y), leg),
                              next_goal=None)
            if not leg:
                return self._on_waypoint(ag)
            return 0.0
        # dropoff
        value = float(ob.value[oid])
        ob.status[oid] = DELIVERED
        ob.assigned[oid] = -1
        ag.earning += value
        ag.total_delivered_value += value
        ag.day_orders += 1
        ag.just_delivered = True
        self._day_delivered += 1
        ag.order_id = -1
        ag.picked_up = False
        ag.status = 1
        ag.route = None
        return value

    def _advance_roam(self, ag: AgentRuntime, speed: float) -> None:
        if ag.roam is None:
            return
        spent = self._advance_route(ag, ag.roam, speed)
        if ag.roam.ptr >= len(ag.roam.leg) or spent == 0.0:
            ag.roam = None

    # -- phase 7

    def _record_phase(self, t: int, pendings: list[_Pending],
                      rewards: dict[int, float]) -> None:
        gamma = self.mem_params.gamma
        ob = self.orders
        tod = t % self.spd
        for i, ag in enumerate(self.agents):
            pend = pendings[i]
            if ag.pending_item is not None:
                # delta needs the next step's state value, so each item is
                # staged for one step and flushed once V_{t+1} is known
                t0, x, y, obs_prev, act, obs_post, reward, v_then, event = ag.pending_item
                delta = gamma * ag.v_now - v_then
                item = mem.make_item(t0=t0, x=x, y=y, obs_prev=obs_prev,
                                     action=act, obs_post=obs_post,
                                     reward=reward, delta=delta, owner=i,
                                     event_type=event)
                if self.memory_model == "mmdm":
                    mem.record(item, self.individual[i], self.buffer)
                else:
                    self.pool.append(item)
                ag.pending_item = None
            if pend.obs is None or ag.status_prev == 0:
                continue
            percept = pend.percept
            event = (mem.EVENT_TRAFFIC if percept.congestion_in_scope
                     else mem.EVENT_WEATHER if percept.weather
                     else mem.EVENT_DELIVERY)
            # obs_prev is the decision context; obs_post re-observes the
            # world from the post-effect state at the end of the same step
            ids = percept.order_ids
            nearest_dist = None
            if len(ids):
                dx = np.abs(ob.sx[ids] - ag.x)
                dy = np.abs(ob.sy[ids] - ag.y)
                lo = np.minimum(dx, dy)
                nearest_dist = float(np.min((np.maximum(dx, dy) - lo) + SQRT2 * lo))
            obs_post = build_observation(
                ag.x, ag.y, self.grid.width, self.grid.height, ag.status,
                tod, self.spd, len(ids), nearest_dist, ag.statics.scope,
                percept.congestion_in_scope, percept.weather)
            ag.pending_item = (t, ag.x, ag.y, pend.obs, ag.last_action,
                               obs_post, rewards[i], ag.v_now, event)

    # -- phase 8

    def _flush_phase(self, t: int) -> None:
        if self.memory_model == "mmdm":
            mem.admit(self.buffer, self.collective, self.mem_params, now=t)
            mem.prune(self.collective, t, self.mem_params)
            floor_t0 = mem.oldest_surviving_t0(t, self.mem_params)
            for store in self.individual.values():
                if len(store) and store.t0[0] < floor_t0:
                    mem.decay_sweep(store, t, self.mem_params)
        else:
            # t0 is nondecreasing under append and order-preserving keep()
            floor_t0 = mem.oldest_surviving_t0(t, self.mem_params)
            if len(self.pool) and self.pool.t0[0] < floor_t0:
                mem.decay_sweep(self.pool, t, self.mem_params)

    # -- phase 9

    def _learning_phase(self, t: int, pendings: list[_Pending],
                        rewards: dict[int, float]) -> None:
        for i, ag in enumerate(self.agents):
            if ag.statics.learning == "imitation" and pendings[i].percept is not None:
                co = []
                for j in pendings[i].percept.co_located:
                    other = self.agents[j]
                    co.append((j, other.earning, other.last_obs, other.last_action))
                observe_expert(self.datasets[i], ag.earning, co, t)
        # buffered Q updates, ascending agent id
        for i, ag in enumerate(self.agents):
            if ag.statics.learning != "qlearning":
                continue
            pend = pendings[i]
            if pend.decided:
                s_now = self._discrete_state(ag, pend.percept)
                if ag.q_pending is not None:
                    # close the macro transition started at the last decision
                    s_prev, a_prev, r_acc = ag.q_pending
                    q_update(self.qtable, s_prev, a_prev, r_acc, s_now,
                             self.cfg.q_alpha, self.cfg.q_gamma)
                ag.q_pending = [s_now, pend.record.chosen_action, rewards[i]]
            elif ag.q_pending is not None:
                ag.q_pending[2] += rewards[i]

    # -- phase 10

    def _end_day(self, t: int) -> None:
        day = t // self.spd
        for ag in self.agents:
            self.agent_rows.append((
                day, ag.statics.agent_id, ag.statics.learning, self.memory_model,
                ag.earning - ag.day_start_earning, ag.day_orders,
                ag.day_effective, ag.day_dec_memory, ag.day_dec_learning,
            ))
        gen = self._day_generated
        rate = self._day_delivered / gen if gen > 0 else 0.0
        self.system_rows.append((day, gen, self._day_delivered,
                                 self._day_expired, rate))

    # ------------------------------------------------------------------

    def run(self) -> None:
        for t in range(self.cfg.steps):
            self.world_step(t)

    def world_hash(self) -> int:
        data = []
        for ag in self.agents:
            data.extend((ag.x, ag.y, ag.status, round(ag.earning, 9)))
        ob = self.orders
        data.append(ob.n)
        data.extend(int(s) for s in ob.status[: ob.n])
        return hash(tuple(data))
