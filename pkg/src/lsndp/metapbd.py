"""Meta Partial Benders Decomposition.

Phase I runs a classical Benders loop (MILP master, LP subproblem, cut pool)
on K-EMP masters whose K is moved by integral bisection whenever a stall
monitor sees no bound progress. Phase II solves an exactly aggregated master
as a single MILP warm-started with the Phase-I incumbent and upper bound.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .backend import (DEFAULT_REL_GAP, FEAS_TOL, INF, INFEASIBLE, OPTIMAL, Backend, get_backend)
from .instance import Instance
from .models import (BendersCut, aggregate_solution, add_cut, build_lsndp, build_master, build_subproblem,
                     disaggregate_solution, extract_flows, extract_vehicles, flow_cost, make_feasibility_cut,
                     make_optimality_cut, master_point, SuperFlowSolution, vehicle_cost, verify_lsndp_solution)
from .partition import PartitionSequence, ProductPartition, build_partition_sequence, refine_to_exact
from .timegraph import TimeExpandedGraph, expand

log = logging.getLogger(__name__)

INCREASE = "increase"
DECREASE = "decrease"


class InfeasibleInstance(RuntimeError):
    pass


class WallClock:
    virtual = False

    def __init__(self):
        self._t0 = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self._t0


class VirtualClock:
    """Advances by ``step`` on every reading; makes runs independent of machine speed."""

    virtual = True

    def __init__(self, step: float = 1.0, start: float = 0.0):
        self.step = step
        self.now = start

    def __call__(self) -> float:
        t = self.now
        self.now += self.step
        return t

    def advance(self, dt: float) -> None:
        self.now += dt


@dataclass
class MetaParams:
    K_max: int = 10
    t_bounds: float = 10.0
    impr_bounds: float = 0.01
    msols_max: int = 1
    t1_max: float = 60.0
    t2_max: float = 120.0
    gap: float = DEFAULT_REL_GAP
    master_gap: float | None = None  # defaults to gap / 4
    seed: int = 0

    def __post_init__(self):
        for name in ("K_max", "t_bounds", "impr_bounds", "msols_max", "t1_max", "t2_max", "gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_time_limit(cls, total: float, **overrides) -> "MetaParams":
        """Budget split used in the reference experiments: 1/18, 1/3 and 2/3 of the limit."""
        base = dict(t_bounds=total / 18, t1_max=total / 3, t2_max=2 * total / 3)
        base.update(overrides)
        return cls(**base)


@dataclass
class Event:
    time: float
    kind: str
    K: int | None
    LB: float
    UB: float
    cuts: int
    detail: str = ""


@dataclass
class BendersState:
    LB: float = 0.0
    UB: float = INF
    y: dict | None = None
    x: dict | None = None
    cut_pool: list[BendersCut] = field(default_factory=list)
    cut_keys: set = field(default_factory=set)
    visited_K: list[int] = field(default_factory=list)
    history: list[Event] = field(default_factory=list)
    K: int | None = None
    master_solutions: int = 0
    subproblems: int = 0
    subproblems_feasible: int = 0
    clock: Callable[[], float] = field(default_factory=WallClock, repr=False)

    @property
    def gap(self) -> float:
        if not math.isfinite(self.UB):
            return INF
        if self.UB <= 0:
            return 0.0 if self.LB >= self.UB - 1e-9 else INF
        return max(0.0, (self.UB - self.LB) / self.UB)

    def converged(self, target: float) -> bool:
        return self.gap <= target

    def record(self, kind: str, detail: str = "") -> None:
        self.history.append(Event(self.clock(), kind, self.K, self.LB, self.UB, len(self.cut_pool), detail))

    def update_ub(self, value: float, y: dict, x: dict, source: str = "") -> bool:
        if value < self.UB - 1e-9 * max(1.0, abs(self.UB) if math.isfinite(self.UB) else 1.0):
            self.UB, self.y, self.x = value, dict(y), dict(x)
            # LB can only be raised by a proof; a better incumbent cannot sit below it
            self.LB = min(self.LB, self.UB)
            self.record("ub", source)
            return True
        return False

    def update_lb(self, value: float, source: str = "") -> bool:
        if not math.isfinite(value):
            return False
        value = min(value, self.UB)
        if value > self.LB + 1e-9 * max(1.0, abs(self.LB)):
            self.LB = value
            self.record("lb", source)
            return True
        return False

    def add_cut(self, cut: BendersCut) -> bool:
        key = cut.key()
        if key in self.cut_keys:
            return False
        self.cut_keys.add(key)
        self.cut_pool.append(cut)
        self.record("cut", cut.kind)
        return True

    def master_times(self) -> list[float]:
        return [e.time for e in self.history if e.kind == "master"]


@dataclass
class KWindow:
    K: int
    K_minus: int | None = None
    K_plus: int | None = None

    @classmethod
    def from_visited(cls, K: int, visited) -> "KWindow":
        below = [v for v in visited if v < K]
        above = [v for v in visited if v > K]
        return cls(K, max(below) if below else None, min(above) if above else None)


def next_k(win: KWindow, K_max: int, direction: str) -> int | None:
    """Integral bisection step; None when K cannot move that way.

    Increasing with nothing visited above K jumps to ``ceil((K_max - K) / 2)``;
    when that value would not exceed K it falls back to ``ceil((K + K_max) / 2)``.
    """
    K = win.K
    if direction == INCREASE:
        if K >= K_max or win.K_plus == K + 1:
            return None
        if win.K_plus is not None:
            return math.ceil((K + win.K_plus) / 2)
        jump = math.ceil((K_max - K) / 2)
        return jump if jump > K else math.ceil((K + K_max) / 2)
    if direction == DECREASE:
        if K <= 1 or win.K_minus == K - 1 or win.K_minus is None:
            return None
        return math.ceil((K + win.K_minus) / 2)
    raise ValueError(f"unknown direction {direction!r}")


class KController:
    """Visited-K bookkeeping for Phase I; ``visited`` is shared with the run state."""

    def __init__(self, K_max: int, visited: list[int] | None = None, start: int = 1):
        self.K_max = K_max
        self.visited = visited if visited is not None else []
        self.K = start
        self.enter(start)

    def enter(self, K: int) -> None:
        if not 1 <= K <= self.K_max:
            raise ValueError(f"K={K} outside [1, {self.K_max}]")
        if K in self.visited:
            raise AssertionError(f"K={K} visited twice")
        self.visited.append(K)
        self.K = K

    def propose(self, direction: str) -> int | None:
        return next_k(KWindow.from_visited(self.K, self.visited), self.K_max, direction)

    def step(self, direction: str) -> int | None:
        """Move in ``direction`` if possible; returns the new K or None (stay)."""
        nk = self.propose(direction)
        if nk is not None:
            self.enter(nk)
        return nk


class StallMonitor:
    """Reports a direction once neither bound improved enough for ``t_bounds``."""

    def __init__(self, params: MetaParams):
        self.params = params
        self.ref_lb = 0.0
        self.ref_ub = INF
        self.last_improvement = 0.0

    def reset(self, state: BendersState, now: float) -> None:
        self.ref_lb, self.ref_ub, self.last_improvement = state.LB, state.UB, now

    def observe(self, state: BendersState, now: float) -> str | None:
        impr = self.params.impr_bounds
        improved = False
        if state.LB - self.ref_lb >= impr * max(abs(self.ref_lb), 1e-9):
            improved = True
        if math.isfinite(state.UB) and (not math.isfinite(self.ref_ub)
                                        or self.ref_ub - state.UB >= impr * abs(self.ref_ub)):
            improved = True
        if improved:
            self.reset(state, now)
            return None
        if now - self.last_improvement < self.params.t_bounds:
            return None
        recent = sum(1 for t in state.master_times() if t >= now - self.params.t_bounds)
        return DECREASE if recent < self.params.msols_max else INCREASE


@dataclass
class BendersOutcome:
    reason: str  # optimal | time | switch | stalled
    next_K: int | None = None


def offer_incumbent(state: BendersState, graph: TimeExpandedGraph, inst: Instance, y: dict, x: dict,
                    source: str) -> bool:
    """Update UB with ``(y, x)`` if it is cheaper and passes an independent feasibility check."""
    value = vehicle_cost(graph, y) + flow_cost(graph, x)
    if value >= state.UB:
        return False
    issues = verify_lsndp_solution(graph, inst, y, x)
    if issues:
        log.warning("rejected %s incumbent: %s", source, issues[:3])
        return False
    return state.update_ub(value, y, x, source)


def heuristic_seed(inst: Instance, graph: TimeExpandedGraph, backend: Backend) -> tuple[dict, dict, float]:
    """Round up the LP-relaxation vehicles, then route optimally on them."""
    lp = backend.solve_lp(build_lsndp(graph, inst, integer=False))
    if lp.status != OPTIMAL:
        raise InfeasibleInstance(f"LP relaxation is {lp.status}")
    y = {}
    for a in graph.transport_arcs:
        v = lp.value(("y", a.index))
        n = math.ceil(v - 1e-7)
        if n > 0:
            y[a.index] = n
    sp = backend.solve_lp(build_subproblem(graph, inst, y))
    if sp.status != OPTIMAL:
        raise InfeasibleInstance(f"rounded allocation is not routable ({sp.status})")
    x = extract_flows(sp)
    return y, x, vehicle_cost(graph, y) + sp.objective


def _remaining(clock, deadline: float) -> float:
    if getattr(clock, "virtual", False):
        return INF
    return max(deadline - clock(), 1e-3)


def benders_solve(master, graph: TimeExpandedGraph, inst: Instance, state: BendersState,
                  backend: Backend, gap: float = DEFAULT_REL_GAP, deadline: float = INF,
                  master_gap: float | None = None, on_iteration: Callable[[BendersState, float], int | None] | None = None,
                  max_iterations: int = 10_000) -> BendersOutcome:
    """Iterate master MILP / subproblem LP until the gap closes, time runs out or ``on_iteration`` asks to switch.

    ``master`` is modified in place: every pooled cut missing from it is added.
    Masters are solved to ``master_gap`` (default ``gap / 4``): the lower bound
    always comes from the master's proven bound, and a master point that yields
    no new cut then already certifies the target gap.
    """
    if master_gap is None:
        master_gap = gap / 4
    clock = state.clock
    in_master = {c.key() for c in getattr(master, "_cut_keys", [])}
    for cut in state.cut_pool:
        if cut.key() not in in_master:
            add_cut(master, cut)
            in_master.add(cut.key())
    master._cut_keys = [c for c in state.cut_pool]

    seen_y: set = set()
    for _ in range(max_iterations):
        if state.converged(gap):
            return BendersOutcome("optimal")
        if clock() >= deadline:
            return BendersOutcome("time")
        start = None
        if state.y is not None:
            start = _warm_start(master, graph, inst, state)
        res = backend.solve_milp(master, time_limit=_remaining(clock, deadline), rel_gap=master_gap, initial=start)
        if res.status == INFEASIBLE:
            raise InfeasibleInstance("master problem is infeasible")
        if not res.has_solution:
            state.update_lb(res.best_bound, "master-bound")
            return BendersOutcome("time")
        state.master_solutions += 1
        state.record("master", f"obj={res.objective:.10g}")
        state.update_lb(res.best_bound, "master")
        ybar = extract_vehicles(res, graph)
        zbar = res.value(("z",))

        sp = backend.solve_lp(build_subproblem(graph, inst, ybar), time_limit=_remaining(clock, deadline))
        state.subproblems += 1
        added = False
        if sp.status == INFEASIBLE:
            state.record("subproblem", "infeasible")
            cut = make_feasibility_cut(sp, inst)
            viol = cut.violation(ybar)
            if viol <= FEAS_TOL:
                log.warning("feasibility cut not violated at its master point (%.3g)", viol)
            added = state.add_cut(cut)
        elif sp.status == OPTIMAL:
            state.subproblems_feasible += 1
            state.record("subproblem", f"cost={sp.objective:.10g}")
            offer_incumbent(state, graph, inst, ybar, extract_flows(sp), "subproblem")
            if sp.objective > zbar + FEAS_TOL * max(1.0, abs(sp.objective)):
                added = state.add_cut(make_optimality_cut(sp, inst))
        else:
            return BendersOutcome("time")
        if added:
            add_cut(master, state.cut_pool[-1])
            master._cut_keys.append(state.cut_pool[-1])
        else:
            key = tuple(sorted(ybar.items()))
            if key in seen_y or sp.status == OPTIMAL:
                # nothing left to separate at this master point: its bound is final
                state.update_lb(res.best_bound, "converged")
                if state.converged(gap):
                    return BendersOutcome("optimal")
                return BendersOutcome("stalled")
            seen_y.add(key)
        if on_iteration is not None:
            nk = on_iteration(state, clock())
            if nk is not None:
                return BendersOutcome("switch", nk)
    return BendersOutcome("stalled")


def _warm_start(master, graph, inst, state) -> np.ndarray | None:
    has_flows = any(v[0] == "xs" for v in master.var_ids)
    if has_flows:
        partition = getattr(master, "partition", None)
        if partition is None:
            return None
        sfs = aggregate_solution(state.x, state.y, partition, graph)
        try:
            return master_point(master, state.y, sfs, z=flow_cost(graph, state.x))
        except KeyError:
            return None
    return master_point(master, state.y, None, z=flow_cost(graph, state.x))


def _master_for(graph, inst, partition: ProductPartition | None):
    m = build_master(graph, inst, partition)
    m.partition = partition
    return m


def phase1(inst: Instance, graph: TimeExpandedGraph, seq: PartitionSequence, params: MetaParams,
           backend: Backend, state: BendersState, monitor: StallMonitor | None = None) -> BendersState:
    """Switch between K-EMP masters by bisection until the gap closes or ``t1_max`` elapses.

    ``monitor`` defaults to a :class:`StallMonitor` on ``params``; anything with
    ``reset(state, now)`` and ``observe(state, now) -> direction | None`` works.
    """
    clock = state.clock
    deadline = clock() + params.t1_max
    ctl = KController(min(params.K_max, seq.K_max), state.visited_K)
    monitor = monitor or StallMonitor(params)
    while True:
        K = ctl.K
        state.K = K
        state.record("switch", f"K={K}")
        master = _master_for(graph, inst, seq[K])
        monitor.reset(state, clock())

        def decide(st, now):
            direction = monitor.observe(st, now)
            return None if direction is None else ctl.propose(direction)

        outcome = benders_solve(master, graph, inst, state, backend, gap=params.gap, deadline=deadline,
                                master_gap=params.master_gap, on_iteration=decide)
        if outcome.reason != "switch":
            state.record("phase1-end", outcome.reason)
            return state
        ctl.enter(outcome.next_K)


def phase2(inst: Instance, graph: TimeExpandedGraph, state: BendersState, params: MetaParams,
           backend: Backend) -> BendersState:
    """Solve the exactly aggregated master as one MILP, seeded with the incumbent and its cost as cutoff."""
    if state.converged(params.gap):
        return state
    clock = state.clock
    partition = refine_to_exact(inst.catalog)
    state.K = partition.K
    state.record("phase2", f"K={partition.K}")
    master = build_master(graph, inst, partition)
    start = None
    cutoff = None
    if state.y is not None:
        sfs = aggregate_solution(state.x, state.y, partition, graph)
        start = master_point(master, state.y, sfs)
        cutoff = state.UB + 1e-7 * max(1.0, abs(state.UB))
    deadline = clock() + params.t2_max
    res = backend.solve_milp(master, time_limit=_remaining(clock, deadline), rel_gap=params.gap,
                             initial=start, cutoff=cutoff)
    state.master_solutions += 1
    if res.has_solution:
        y = extract_vehicles(res, graph)
        sfs_flows = {(a, k): v for (a, k), v in extract_flows(res, "xs").items()}
        x = disaggregate_solution(SuperFlowSolution(sfs_flows, res.value(("z",))), y, partition, graph, inst)
        offer_incumbent(state, graph, inst, y, x, "phase2")
        state.update_lb(res.best_bound, "phase2")
    elif res.status == INFEASIBLE and cutoff is not None:
        # nothing below the cutoff: the incumbent is optimal
        state.update_lb(state.UB, "phase2-cutoff")
    else:
        state.update_lb(res.best_bound, "phase2")
    state.record("phase2-end", res.status)
    return state


@dataclass
class FinalResult:
    y: dict
    x: dict
    UB: float
    LB: float
    gap: float
    state: BendersState
    K_trajectory: list[int]
    verified: bool

    @property
    def history(self) -> list[Event]:
        return self.state.history


def meta_pbd(inst: Instance, params: MetaParams | None = None, backend: Backend | None = None,
             clock=None, graph: TimeExpandedGraph | None = None,
             run_phase1: bool = True, run_phase2: bool = True) -> FinalResult:
    params = params or MetaParams()
    backend = backend or get_backend()
    graph = graph or expand(inst)
    state = BendersState(clock=clock or WallClock())
    state.record("start")
    y, x, ub = heuristic_seed(inst, graph, backend)
    offer_incumbent(state, graph, inst, y, x, "heuristic")
    if run_phase1:
        seq = build_partition_sequence(inst.catalog, min(params.K_max, len(inst.products)))
        phase1(inst, graph, seq, params, backend, state)
    if run_phase2:
        phase2(inst, graph, state, params, backend)
    issues = verify_lsndp_solution(graph, inst, state.y, state.x)
    if issues:
        raise RuntimeError(f"final solution failed verification: {issues[:3]}")
    state.record("end")
    return FinalResult(state.y, state.x, state.UB, state.LB, state.gap, state, list(state.visited_K), True)


def static_pbd(inst: Instance, partition: ProductPartition | None, time_limit: float, gap: float = DEFAULT_REL_GAP,
               backend: Backend | None = None, clock=None, graph: TimeExpandedGraph | None = None) -> FinalResult:
    """Benders on one fixed master (no K switching), seeded with the rounding heuristic."""
    backend = backend or get_backend()
    graph = graph or expand(inst)
    state = BendersState(clock=clock or WallClock())
    state.record("start")
    y, x, ub = heuristic_seed(inst, graph, backend)
    offer_incumbent(state, graph, inst, y, x, "heuristic")
    state.K = partition.K if partition is not None else 0
    state.visited_K.append(state.K)
    master = _master_for(graph, inst, partition)
    benders_solve(master, graph, inst, state, backend, gap=gap, deadline=state.clock() + time_limit)
    issues = verify_lsndp_solution(graph, inst, state.y, state.x)
    if issues:
        raise RuntimeError(f"final solution failed verification: {issues[:3]}")
    state.record("end")
    return FinalResult(state.y, state.x, state.UB, state.LB, state.gap, state, list(state.visited_K), True)


LOG_FIELDS = ("time", "kind", "K", "LB", "UB", "cuts", "detail")


def write_run_log(history: list[Event], path) -> None:
    """Tab-separated event stream: ``time kind K LB UB cuts detail``, one event per line."""
    with open(path, "w") as fh:
        fh.write("\t".join(LOG_FIELDS) + "\n")
        for e in history:
            fh.write(f"{e.time:.6f}\t{e.kind}\t{'' if e.K is None else e.K}\t{e.LB!r}\t{e.UB!r}\t{e.cuts}\t{e.detail}\n")


def read_run_log(path) -> list[Event]:
    events = []
    lines = Path(path).read_text().splitlines()
    for line in lines[1:]:
        t, kind, K, lb, ub, cuts, detail = line.split("\t", 6)
        events.append(Event(float(t), kind, int(K) if K else None, float(lb), float(ub), int(cuts), detail))
    return events
