"""Time-expanded network built from a static instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .instance import CUSTOMER, SUPPLIER, WAREHOUSE, Instance

TRANSPORT = "transport"
HOLDING = "holding"


@dataclass(frozen=True, order=True)
class TimeNode:
    node: str
    period: int


@dataclass(frozen=True)
class TimeArc:
    index: int
    kind: str
    tail: TimeNode
    head: TimeNode
    unit_cost: float
    fixed_cost: float = 0.0
    capacity_bound: float | None = None

    @property
    def key(self) -> tuple:
        return (self.tail.node, self.head.node, self.tail.period)


def travel_periods(hours: float, periods_per_day: int) -> int:
    """Travel time rounded up to a whole number of periods (at least one)."""
    hpp = 24.0 / periods_per_day
    # guard against 3.0000000001-style representation error on exact multiples
    return max(1, math.ceil(hours / hpp - 1e-9))


@dataclass
class TimeExpandedGraph:
    horizon: int
    transport_arcs: list[TimeArc]
    holding_arcs: list[TimeArc]
    suppliers: list[TimeNode]
    warehouses: list[TimeNode]
    customers: list[TimeNode]
    tau: dict[tuple[str, str], int]
    roles: dict[str, str]
    out_arcs: dict[TimeNode, list[TimeArc]] = field(default_factory=dict)
    in_arcs: dict[TimeNode, list[TimeArc]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.out_arcs and not self.in_arcs:
            for node in self.time_nodes:
                self.out_arcs[node] = []
                self.in_arcs[node] = []
            for arc in self.arcs:
                self.out_arcs[arc.tail].append(arc)
                self.in_arcs[arc.head].append(arc)

    @property
    def time_nodes(self) -> list[TimeNode]:
        return self.suppliers + self.warehouses + self.customers

    @property
    def arcs(self) -> list[TimeArc]:
        return self.transport_arcs + self.holding_arcs

    def arc(self, index: int) -> TimeArc:
        n = len(self.transport_arcs)
        return self.transport_arcs[index] if index < n else self.holding_arcs[index - n]

    def role(self, tn: TimeNode) -> str:
        return self.roles[tn.node]

    def dump_edges(self) -> str:
        """Plain edge list, one arc per line, for debugging."""
        lines = ["# kind tail_node tail_t head_node head_t unit_cost fixed_cost capacity"]
        for a in self.arcs:
            cap = "-" if a.capacity_bound is None else f"{a.capacity_bound:g}"
            lines.append(f"{a.kind} {a.tail.node} {a.tail.period} {a.head.node} {a.head.period} "
                         f"{a.unit_cost:g} {a.fixed_cost:g} {cap}")
        return "\n".join(lines) + "\n"


def expand(inst: Instance) -> TimeExpandedGraph:
    """Build transport arcs for every feasible departure and holding arcs at warehouses.

    Arrivals at the last period are admitted (``t + tau <= |T|``) so that
    demands due at the end of the horizon can be served.
    """
    T = inst.horizon_periods
    roles = {n.id: n.role for n in inst.nodes}
    periods = range(1, T + 1)

    def nodes_of(role):
        return [TimeNode(n.id, t) for n in inst.nodes if n.role == role for t in periods]

    tau: dict[tuple[str, str], int] = {}
    transport: list[TimeArc] = []
    for a in sorted(inst.arcs, key=lambda a: (a.origin, a.dest)):
        k = travel_periods(a.travel_time_hours, inst.periods_per_day)
        tau[(a.origin, a.dest)] = k
        for t in range(1, T - k + 1):
            transport.append(TimeArc(len(transport), TRANSPORT, TimeNode(a.origin, t),
                                     TimeNode(a.dest, t + k), a.unit_flow_cost, a.fixed_vehicle_cost))
    holding: list[TimeArc] = []
    for n in sorted(inst.nodes_with_role(WAREHOUSE), key=lambda n: n.id):
        for t in range(1, T):
            holding.append(TimeArc(len(transport) + len(holding), HOLDING, TimeNode(n.id, t),
                                   TimeNode(n.id, t + 1), n.storage_cost, 0.0, n.storage_capacity))
    return TimeExpandedGraph(horizon=T, transport_arcs=transport, holding_arcs=holding,
                             suppliers=nodes_of(SUPPLIER), warehouses=nodes_of(WAREHOUSE),
                             customers=nodes_of(CUSTOMER), tau=tau, roles=roles)
