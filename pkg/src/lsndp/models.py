"""Optimisation models (full MILP, subproblem, K-EMP master), Benders cuts and
conversions between product flows and super-product flows.

Variable ids: ``("y", a)`` vehicles on transport arc ``a``; ``("x", a, p)``
flow of product ``p``; ``("xs", a, k)`` flow of super-product ``k``; ``("z",)``
flow-cost estimate. Row ids: ``("flow", node, t, c)``, ``("demand", node, t, c)``,
``("hold", a)``, ``("cap", a)``, ``("zdef",)`` and ``("cut", n)``.

Flow of a commodity into a customer time node is only modelled where that
customer has positive demand for it there: such flow can never lower the cost
and dropping it leaves the optimum unchanged.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .backend import FEAS_TOL, INFEASIBLE, OPTIMAL, LinearModel, SolveResult
from .instance import CUSTOMER, SUPPLIER, WAREHOUSE, Instance
from .partition import PartitionError, ProductPartition, is_exact_subset
from .timegraph import TimeArc, TimeExpandedGraph, TimeNode

VehicleSolution = dict  # transport arc index -> non-negative integer
FlowSolution = dict  # (arc index, product) -> non-negative flow


class CutError(ValueError):
    pass


class NotExactlyAggregatable(ValueError):
    pass


@dataclass
class SuperFlowSolution:
    x_super: dict[tuple[int, int], float]
    z: float


@dataclass
class BendersCut:
    """``z_coeff * z >= constant + sum(y_coeffs[a] * y[a])``."""

    kind: str
    y_coeffs: dict[int, float]
    constant: float
    z_coeff: float

    def rhs(self, y: Mapping[int, float]) -> float:
        return self.constant + sum(c * y.get(a, 0.0) for a, c in self.y_coeffs.items())

    def violation(self, y: Mapping[int, float], z: float = 0.0) -> float:
        """Positive when ``(y, z)`` violates the cut."""
        return self.rhs(y) - self.z_coeff * z

    def key(self, digits: int = 9) -> tuple:
        coeffs = tuple(sorted((a, round(c, digits)) for a, c in self.y_coeffs.items() if abs(c) > 1e-12))
        return (self.kind, round(self.constant, digits), coeffs)


# --- flow layer --------------------------------------------------------------

@dataclass
class _FlowLayer:
    var_of: dict[tuple[int, Hashable], int] = field(default_factory=dict)
    per_arc: dict[int, list[int]] = field(default_factory=lambda: defaultdict(list))


def _demand_by_commodity(inst: Instance, commodity_of: Mapping[str, Hashable]) -> dict[tuple[TimeNode, Hashable], float]:
    out: dict[tuple[TimeNode, Hashable], float] = defaultdict(float)
    for d in inst.demands:
        out[(TimeNode(d.customer, d.period), commodity_of[d.product])] += d.quantity
    return dict(out)


def _add_flow_layer(model: LinearModel, graph: TimeExpandedGraph, inst: Instance,
                    commodities: list, offered: Callable[[str, Hashable], bool],
                    demand: Mapping[tuple[TimeNode, Hashable], float], var_tag: str,
                    cost_in_objective: bool) -> _FlowLayer:
    layer = _FlowLayer()
    for arc in graph.arcs:
        tail_role = graph.role(arc.tail)
        head_role = graph.role(arc.head)
        for c in commodities:
            if tail_role == SUPPLIER and not offered(arc.tail.node, c):
                continue
            if head_role == CUSTOMER and demand.get((arc.head, c), 0.0) <= 0:
                continue
            pos = model.add_var((var_tag, arc.index, c), obj=arc.unit_cost if cost_in_objective else 0.0)
            layer.var_of[(arc.index, c)] = pos
            layer.per_arc[arc.index].append(pos)

    for wn in graph.warehouses:
        for c in commodities:
            terms = [(layer.var_of[(a.index, c)], 1.0) for a in graph.in_arcs[wn] if (a.index, c) in layer.var_of]
            terms += [(layer.var_of[(a.index, c)], -1.0) for a in graph.out_arcs[wn] if (a.index, c) in layer.var_of]
            if terms:
                model.add_constr(("flow", wn.node, wn.period, c), terms, "=", 0.0)
    for cn in graph.customers:
        for c in commodities:
            q = demand.get((cn, c), 0.0)
            if q <= 0:
                continue
            terms = [(layer.var_of[(a.index, c)], 1.0) for a in graph.in_arcs[cn] if (a.index, c) in layer.var_of]
            model.add_constr(("demand", cn.node, cn.period, c), terms, ">=", q)
    for arc in graph.holding_arcs:
        terms = [(pos, 1.0) for pos in layer.per_arc.get(arc.index, ())]
        if terms:
            model.add_constr(("hold", arc.index), terms, "<=", arc.capacity_bound)
    return layer


def _supplier_offers(inst: Instance) -> Mapping[str, frozenset]:
    return inst.catalog.supplier_offers


def _add_vehicles(model: LinearModel, graph: TimeExpandedGraph, integer: bool = True) -> dict[int, int]:
    return {a.index: model.add_var(("y", a.index), obj=a.fixed_cost, integer=integer)
            for a in graph.transport_arcs}


def build_lsndp(graph: TimeExpandedGraph, inst: Instance, integer: bool = True) -> LinearModel:
    """Full MILP: vehicle fixed costs plus transport and holding flow costs."""
    model = LinearModel(f"lsndp-{inst.name}")
    ypos = _add_vehicles(model, graph, integer)
    offers = _supplier_offers(inst)
    products = list(inst.products)
    demand = _demand_by_commodity(inst, {p: p for p in products})
    layer = _add_flow_layer(model, graph, inst, products,
                            lambda s, p: p in offers.get(s, ()), demand, "x", True)
    u = inst.vehicle_capacity
    for arc in graph.transport_arcs:
        terms = [(pos, 1.0) for pos in layer.per_arc.get(arc.index, ())]
        terms.append((ypos[arc.index], -u))
        model.add_constr(("cap", arc.index), terms, "<=", 0.0)
    return model


def build_subproblem(graph: TimeExpandedGraph, inst: Instance, ybar: Mapping[int, float]) -> LinearModel:
    """Routing LP for a fixed vehicle allocation; capacity rows read ``sum x <= u * ybar``."""
    model = LinearModel(f"sp-{inst.name}")
    offers = _supplier_offers(inst)
    products = list(inst.products)
    demand = _demand_by_commodity(inst, {p: p for p in products})
    layer = _add_flow_layer(model, graph, inst, products,
                            lambda s, p: p in offers.get(s, ()), demand, "x", True)
    u = inst.vehicle_capacity
    for arc in graph.transport_arcs:
        terms = [(pos, 1.0) for pos in layer.per_arc.get(arc.index, ())]
        model.add_constr(("cap", arc.index), terms, "<=", u * float(ybar.get(arc.index, 0)))
    return model


def build_master(graph: TimeExpandedGraph, inst: Instance, partition: ProductPartition | None,
                 cuts: Iterable[BendersCut] = (), integer: bool = True) -> LinearModel:
    """K-EMP master; ``partition`` None or empty gives the standard master (vehicles and ``z`` only).

    Warehouse storage capacity bounds the sum of all super-product flows on a
    holding arc.
    """
    model = LinearModel(f"master-{inst.name}")
    ypos = _add_vehicles(model, graph, integer)
    zpos = model.add_var(("z",), obj=1.0)
    if partition is not None and partition.K > 0:
        partition.check(inst.products)
        subsets = [frozenset(s) for s in partition.subsets]
        where = partition.index_of()
        offers = _supplier_offers(inst)
        ks = list(range(partition.K))
        demand = _demand_by_commodity(inst, where)
        layer = _add_flow_layer(model, graph, inst, ks,
                                lambda s, k: bool(offers.get(s, frozenset()) & subsets[k]), demand, "xs", False)
        u = inst.vehicle_capacity
        for arc in graph.transport_arcs:
            terms = [(pos, 1.0) for pos in layer.per_arc.get(arc.index, ())]
            if terms:
                terms.append((ypos[arc.index], -u))
                model.add_constr(("cap", arc.index), terms, "<=", 0.0)
        zterms = [(zpos, 1.0)]
        for (a, k), pos in layer.var_of.items():
            zterms.append((pos, -graph.arc(a).unit_cost))
        model.add_constr(("zdef",), zterms, ">=", 0.0)
    for cut in cuts:
        add_cut(model, cut)
    return model


def add_cut(model: LinearModel, cut: BendersCut) -> int:
    n = sum(1 for r in model.row_ids if r[0] == "cut")
    terms = [(model.var(("y", a)), -c) for a, c in cut.y_coeffs.items() if c != 0.0]
    if cut.z_coeff:
        terms.append((model.var(("z",)), cut.z_coeff))
    return model.add_constr(("cut", n), terms, ">=", cut.constant)


# --- cuts ----------------------------------------------------------------------

def _cut_from_multipliers(model: LinearModel, mult: np.ndarray, u: float, kind: str) -> BendersCut:
    constant = 0.0
    coeffs: dict[int, float] = {}
    for r, rid in enumerate(model.row_ids):
        v = float(mult[r])
        if v == 0.0:
            continue
        tag = rid[0]
        if tag == "cap":
            coeffs[rid[1]] = u * v
        elif tag in ("demand", "hold"):
            constant += model.rhs[r] * v
        elif tag != "flow":
            raise CutError(f"unexpected row {rid!r} in subproblem")
    return BendersCut(kind, coeffs, constant, 1.0 if kind == "optimality" else 0.0)


def make_feasibility_cut(result: SolveResult, inst: Instance) -> BendersCut:
    """Cut from a dual ray of an infeasible subproblem, ray scaled to unit max-norm."""
    if result.status != INFEASIBLE:
        raise CutError(f"feasibility cut needs an infeasible subproblem (status {result.status})")
    ray = result.ray_values
    if ray is None:
        raise CutError("invalid certificate: no ray available")
    scale = float(np.max(np.abs(ray))) if len(ray) else 0.0
    if scale <= 1e-12:
        raise CutError("invalid certificate: all-zero ray")
    return _cut_from_multipliers(result.model, np.asarray(ray) / scale, inst.vehicle_capacity, "feasibility")


def make_optimality_cut(result: SolveResult, inst: Instance) -> BendersCut:
    """``z >= demand and storage dual terms + u * capacity duals * y``."""
    if result.status != OPTIMAL or result.row_duals is None:
        raise CutError("optimality cut needs optimal subproblem duals")
    return _cut_from_multipliers(result.model, result.row_duals, inst.vehicle_capacity, "optimality")


# --- solutions -------------------------------------------------------------------

def extract_vehicles(result: SolveResult, graph: TimeExpandedGraph) -> VehicleSolution:
    return {a.index: int(round(result.value(("y", a.index)))) for a in graph.transport_arcs
            if round(result.value(("y", a.index))) > 0}


def extract_flows(result: SolveResult, tag: str = "x", eps: float = 0.0) -> dict:
    out = {}
    for vid, v in zip(result.model.var_ids, result.x):
        if vid[0] == tag and v > eps:
            out[(vid[1], vid[2])] = float(v)
    return out


def flow_cost(graph: TimeExpandedGraph, flows: Mapping[tuple[int, Hashable], float]) -> float:
    return float(sum(graph.arc(a).unit_cost * v for (a, _), v in flows.items()))


def vehicle_cost(graph: TimeExpandedGraph, y: Mapping[int, float]) -> float:
    return float(sum(graph.transport_arcs[a].fixed_cost * v for a, v in y.items()))


def lsndp_cost(graph: TimeExpandedGraph, y: Mapping[int, float], x: Mapping) -> float:
    return vehicle_cost(graph, y) + flow_cost(graph, x)


def verify_lsndp_solution(graph: TimeExpandedGraph, inst: Instance, y: Mapping[int, float],
                          x: Mapping[tuple[int, str], float], tol: float = FEAS_TOL) -> list[str]:
    """Check a solution against the LSNDP constraints without any solver.

    Returns human-readable violations (empty when feasible). Tolerances are
    relative to the magnitude of the quantities involved.
    """
    issues: list[str] = []
    offers = inst.catalog.supplier_offers
    products = set(inst.products)
    inflow: dict[tuple[TimeNode, str], float] = defaultdict(float)
    outflow: dict[tuple[TimeNode, str], float] = defaultdict(float)
    load: dict[int, float] = defaultdict(float)
    for (a, p), v in x.items():
        if v < -tol:
            issues.append(f"negative flow {v} on arc {a} product {p}")
        if p not in products:
            issues.append(f"unknown product {p}")
            continue
        arc = graph.arc(a)
        if graph.role(arc.tail) == SUPPLIER and p not in offers.get(arc.tail.node, ()):
            issues.append(f"supplier {arc.tail.node} ships {p} it does not offer")
        outflow[(arc.tail, p)] += v
        inflow[(arc.head, p)] += v
        load[a] += v
    for a, v in y.items():
        if v < -tol or abs(v - round(v)) > tol:
            issues.append(f"vehicle count {v} on arc {a} is not a non-negative integer")
    for wn in graph.warehouses:
        for p in products:
            i, o = inflow.get((wn, p), 0.0), outflow.get((wn, p), 0.0)
            if abs(i - o) > tol * max(1.0, i, o):
                issues.append(f"conservation at {wn} for {p}: in {i} out {o}")
    for d in inst.demands:
        got = inflow.get((TimeNode(d.customer, d.period), d.product), 0.0)
        if got < d.quantity - tol * max(1.0, d.quantity):
            issues.append(f"demand {d} receives only {got}")
    u = inst.vehicle_capacity
    for arc in graph.holding_arcs:
        if load.get(arc.index, 0.0) > arc.capacity_bound + tol * max(1.0, arc.capacity_bound):
            issues.append(f"storage {load[arc.index]} exceeds capacity {arc.capacity_bound} on {arc.tail}")
    for arc in graph.transport_arcs:
        cap = u * y.get(arc.index, 0)
        if load.get(arc.index, 0.0) > cap + tol * max(1.0, cap):
            issues.append(f"load {load[arc.index]} exceeds {cap} on transport arc {arc.index}")
    return issues


def aggregate_solution(x: Mapping[tuple[int, str], float], y: Mapping[int, float],
                       partition: ProductPartition, graph: TimeExpandedGraph) -> SuperFlowSolution:
    """Sum product flows per subset; ``z`` is the resulting flow cost."""
    where = partition.index_of()
    x_super: dict[tuple[int, int], float] = defaultdict(float)
    for (a, p), v in x.items():
        x_super[(a, where[p])] += v
    x_super = dict(x_super)
    return SuperFlowSolution(x_super, flow_cost(graph, x_super))


def master_point(master: LinearModel, y: Mapping[int, float], sfs: SuperFlowSolution | None,
                 z: float | None = None) -> np.ndarray:
    """Vector for ``master`` holding ``y``, the super-flows and ``z``."""
    vec = np.zeros(master.num_vars)
    for a, v in y.items():
        vec[master.var(("y", a))] = v
    if sfs is not None:
        for (a, k), v in sfs.x_super.items():
            if v != 0.0:
                vec[master.var(("xs", a, k))] = v
        vec[master.var(("z",))] = sfs.z if z is None else z
    elif z is not None:
        vec[master.var(("z",))] = z
    return vec


def check_exactly_aggregatable(partition: ProductPartition, inst: Instance) -> None:
    index = inst.catalog.supplier_index()
    for k, sub in enumerate(partition.subsets):
        if not is_exact_subset(sub, index):
            raise NotExactlyAggregatable(
                f"not exactly aggregatable: subset {k} {list(sub)} mixes different supplier sets")


def decompose_paths(graph: TimeExpandedGraph, flows: Mapping[int, float], eps: float = 1e-9
                    ) -> tuple[list[tuple[list[int], float]], dict[int, float]]:
    """Peel supplier-to-customer paths off an acyclic arc flow.

    Paths are traced backwards from customer time nodes (sorted), taking the
    lexicographically smallest arc with positive residual at each step, and
    carry the bottleneck amount. Returns ``(paths, residual)``; residual holds
    numerical crumbs below ``eps`` that do not form a path.
    """
    residual = {a: v for a, v in flows.items() if v > 0}
    paths: list[tuple[list[int], float]] = []
    dropped: dict[int, float] = {}
    for cn in sorted(graph.customers):
        while True:
            incoming = sorted(a.index for a in graph.in_arcs[cn] if residual.get(a.index, 0.0) > eps)
            if not incoming:
                break
            path = [incoming[0]]
            node = graph.arc(incoming[0]).tail
            while graph.role(node) == WAREHOUSE:
                options = sorted(a.index for a in graph.in_arcs[node] if residual.get(a.index, 0.0) > eps)
                if not options:
                    break
                path.append(options[0])
                node = graph.arc(options[0]).tail
            if graph.role(node) != SUPPLIER:
                # trail died at a warehouse whose inflow is only noise; its outflow is noise too
                dropped[path[-1]] = dropped.get(path[-1], 0.0) + residual[path[-1]]
                residual[path[-1]] = 0.0
                continue
            path.reverse()
            amount = min(residual[a] for a in path)
            for a in path:
                residual[a] -= amount
            paths.append((path, amount))
    leftover = {a: v for a, v in residual.items() if abs(v) > 0}
    for a, v in dropped.items():
        leftover[a] = leftover.get(a, 0.0) + v
    return paths, leftover


def disaggregate_solution(sfs: SuperFlowSolution, y: Mapping[int, float], partition: ProductPartition,
                          graph: TimeExpandedGraph, inst: Instance) -> FlowSolution:
    """Turn a K-EMP point into product flows when every subset has one supplier set.

    Each super-product's flow is decomposed into paths; at every customer the
    paths are cut into consecutive pieces carrying each member product's
    demand, any surplus staying with the last product served there.
    """
    check_exactly_aggregatable(partition, inst)
    demand = inst.demand_map()
    x: dict[tuple[int, str], float] = defaultdict(float)
    for k, subset in enumerate(partition.subsets):
        flows = {a: v for (a, kk), v in sfs.x_super.items() if kk == k}
        if not flows:
            continue
        paths, leftover = decompose_paths(graph, flows)
        by_customer: dict[TimeNode, list[tuple[list[int], float]]] = defaultdict(list)
        for path, amount in paths:
            by_customer[graph.arc(path[-1]).head].append((path, amount))
        for cn, plist in by_customer.items():
            wanted = [(p, demand.get((cn.node, cn.period, p), 0.0)) for p in subset]
            wanted = [(p, q) for p, q in wanted if q > 0] or [(subset[0], 0.0)]
            i, remaining = 0, wanted[0][1]
            for path, amount in plist:
                while amount > 0:
                    if i == len(wanted) - 1:
                        take = amount  # last product absorbs any surplus
                    else:
                        take = min(amount, remaining)
                    p = wanted[i][0]
                    for a in path:
                        x[(a, p)] += take
                    amount -= take
                    remaining -= take
                    if remaining <= 0 and i < len(wanted) - 1:
                        i += 1
                        remaining = wanted[i][1]
        # crumbs below the peeling tolerance stay on their arcs under one product
        for a, v in leftover.items():
            x[(a, _product_for_arc(graph, a, subset, demand))] += v
    return {key: v for key, v in x.items() if v != 0.0}


def _product_for_arc(graph, a, subset, demand):
    head = graph.arc(a).head
    if graph.role(head) == CUSTOMER:
        for p in subset:
            if demand.get((head.node, head.period, p), 0.0) > 0:
                return p
    return subset[0]
