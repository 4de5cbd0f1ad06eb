"""Seeded random LSNDP instances.

Scheme (all draws from ``numpy.random.default_rng(seed)``, i.e. PCG64, in the
order listed):

1. node roles from ``echelon_mix`` (rounded counts, suppliers first, then
   warehouses, then customers), positions uniform in a ``side`` x ``side`` square;
2. arcs for every ordered pair allowed by the echelon rule within distance
   ``radius``; per-arc cost multipliers uniform in ``unit_cost_range`` and
   ``fixed_cost_range`` scaled by distance; travel hours = distance * ``hours_per_unit``;
3. warehouse storage cost and capacity uniform in their ranges;
4. products: the first ``n_families`` (in a random order) seed one family
   each, the rest pick a family uniformly;
5. suppliers pick 1..min(3, n_families) families uniformly and offer each
   product of those families with probability ``phi``;
6. per customer a Poisson(``demand_density * days``) number of demands; the
   product is uniform among those some offering supplier can deliver to the
   customer within the horizon, the period uniform between that product's
   earliest arrival and the horizon end, the quantity an integer uniform in
   ``quantity_range``.

Positions are redrawn (up to ``max_layout_tries``) when some customer cannot
be reached from any supplier within the horizon; the catalog (step 5) is
redrawn, at most 100 times, when some customer could receive no product in
time.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .instance import (ALLOWED_ECHELONS, CUSTOMER, SUPPLIER, WAREHOUSE, Arc, Demand, Instance, Node,
                       ProductCatalog, merge_demands, validate_instance)
from .partition import set_matching_rate
from .timegraph import travel_periods

MAX_CATALOG_TRIES = 100


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorParams:
    n_nodes: int = 10
    radius: float = 60.0
    days: int = 2
    periods_per_day: int = 2
    n_families: int = 3
    n_products: int = 6
    phi: float = 0.5
    seed: int = 0
    echelon_mix: tuple[float, float, float] = (0.3, 0.3, 0.4)
    demand_density: float = 1.0
    unit_cost_range: tuple[float, float] = (0.01, 0.03)
    fixed_cost_range: tuple[float, float] = (1.0, 3.0)
    storage_cost_range: tuple[float, float] = (0.1, 0.5)
    storage_capacity_range: tuple[float, float] = (50.0, 200.0)
    quantity_range: tuple[int, int] = (1, 20)
    vehicle_capacity: float = 40.0
    side: float = 100.0
    hours_per_unit: float = 0.25
    max_layout_tries: int = 100
    name: str | None = None

    def __post_init__(self):
        for attr in ("n_nodes", "days", "periods_per_day", "n_families", "n_products", "vehicle_capacity",
                     "radius", "side", "hours_per_unit"):
            if not getattr(self, attr) > 0:
                raise GeneratorError(f"{attr} must be positive")
        if not 0.0 <= self.phi <= 1.0:
            raise GeneratorError("phi must lie in [0, 1]")
        if self.n_products < self.n_families:
            raise GeneratorError("need at least one product per family")
        mix = self.echelon_mix
        if len(mix) != 3 or min(mix) < 0 or not math.isclose(sum(mix), 1.0, abs_tol=1e-9):
            raise GeneratorError("echelon_mix must be three non-negative fractions summing to 1")
        if self.n_nodes < 2:
            raise GeneratorError("need at least a supplier and a customer")
        if self.demand_density < 0:
            raise GeneratorError("demand_density must be non-negative")
        for attr in ("unit_cost_range", "fixed_cost_range", "storage_cost_range", "storage_capacity_range",
                     "quantity_range"):
            lo, hi = getattr(self, attr)
            if lo > hi or lo < 0:
                raise GeneratorError(f"{attr} must satisfy 0 <= min <= max")
        if self.unit_cost_range[0] <= 0 or self.fixed_cost_range[0] <= 0 or self.quantity_range[0] <= 0:
            raise GeneratorError("arc costs and quantities must be strictly positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorParams":
        data = dict(data)
        for key in ("echelon_mix", "unit_cost_range", "fixed_cost_range", "storage_cost_range",
                    "storage_capacity_range", "quantity_range"):
            if key in data:
                data[key] = tuple(data[key])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise GeneratorError(f"unknown generator parameters {sorted(unknown)}")
        return cls(**data)


def _role_counts(p: GeneratorParams) -> tuple[int, int, int]:
    n_s = max(1, round(p.echelon_mix[0] * p.n_nodes))
    n_c = max(1, round(p.echelon_mix[2] * p.n_nodes))
    if n_s + n_c > p.n_nodes:
        n_c = p.n_nodes - n_s
    return n_s, p.n_nodes - n_s - n_c, n_c


def _uniform(rng, lo_hi, digits: int = 4) -> float:
    return round(float(rng.uniform(*lo_hi)), digits)


def _earliest_arrivals(arcs: list[Arc], sources: list[str], periods_per_day: int) -> dict[str, dict[str, int]]:
    """Shortest travel time in periods from each source to every node (Dijkstra)."""
    adj: dict[str, list[tuple[str, int]]] = {}
    for a in arcs:
        adj.setdefault(a.origin, []).append((a.dest, travel_periods(a.travel_time_hours, periods_per_day)))
    out = {}
    for s in sources:
        dist = {s: 0}
        heap = [(0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf):
                continue
            for v, w in adj.get(u, ()):
                if d + w < dist.get(v, math.inf):
                    dist[v] = d + w
                    heapq.heappush(heap, (d + w, v))
        out[s] = dist
    return out


def _layout(p: GeneratorParams, rng) -> tuple[list[Node], list[Arc], dict[str, dict[str, int]]]:
    n_s, n_w, n_c = _role_counts(p)
    roles = [SUPPLIER] * n_s + [WAREHOUSE] * n_w + [CUSTOMER] * n_c
    width = len(str(p.n_nodes))
    ids = ([f"s{i + 1:0{width}d}" for i in range(n_s)] + [f"w{i + 1:0{width}d}" for i in range(n_w)]
           + [f"c{i + 1:0{width}d}" for i in range(n_c)])
    for _ in range(p.max_layout_tries):
        pos = rng.uniform(0.0, p.side, size=(p.n_nodes, 2))
        nodes = []
        for nid, role in zip(ids, roles):
            if role == WAREHOUSE:
                nodes.append(Node(nid, role, _uniform(rng, p.storage_cost_range),
                                  float(round(rng.uniform(*p.storage_capacity_range)))))
            else:
                nodes.append(Node(nid, role))
        arcs = []
        for i in range(p.n_nodes):
            for j in range(p.n_nodes):
                if i == j or (roles[i], roles[j]) not in ALLOWED_ECHELONS:
                    continue
                dist = float(np.hypot(*(pos[i] - pos[j])))
                if dist > p.radius:
                    continue
                dist = max(dist, 1e-3)
                arcs.append(Arc(ids[i], ids[j],
                                travel_time_hours=round(dist * p.hours_per_unit, 4),
                                unit_flow_cost=max(round(dist * rng.uniform(*p.unit_cost_range), 4), 1e-4),
                                fixed_vehicle_cost=max(round(dist * rng.uniform(*p.fixed_cost_range), 2), 0.01)))
        reach = _earliest_arrivals(arcs, ids[:n_s], p.periods_per_day)
        customers = ids[n_s + n_w:]
        horizon = p.days * p.periods_per_day
        if all(any(1 + reach[s].get(c, math.inf) <= horizon for s in reach) for c in customers):
            return nodes, arcs, reach
    raise GeneratorError(f"infeasible params: no layout within {p.max_layout_tries} tries connects every "
                         f"customer to a supplier (radius {p.radius} too small?)")


def _catalog(p: GeneratorParams, rng, suppliers: list[str], phi: float) -> ProductCatalog:
    width = len(str(p.n_products))
    products = tuple(f"p{i + 1:0{width}d}" for i in range(p.n_products))
    fam_of = np.empty(p.n_products, dtype=int)
    order = rng.permutation(p.n_products)
    fam_of[order[:p.n_families]] = np.arange(p.n_families)
    fam_of[order[p.n_families:]] = rng.integers(0, p.n_families, size=p.n_products - p.n_families)
    families = tuple(frozenset(products[i] for i in range(p.n_products) if fam_of[i] == k)
                     for k in range(p.n_families))
    if phi <= 0.0:
        raise GeneratorError("phi = 0 leaves every product without a supplier")
    if 3 * len(suppliers) < p.n_families:
        raise GeneratorError(f"{len(suppliers)} suppliers cannot cover {p.n_families} families")
    # every family needs a specialised supplier and every product an offer; both are redrawn until they do
    for _ in range(MAX_CATALOG_TRIES):
        specialised = {}
        for s in suppliers:
            n_fam = int(rng.integers(1, min(3, p.n_families) + 1))
            specialised[s] = frozenset(int(k) for k in rng.choice(p.n_families, size=n_fam, replace=False))
        if set().union(*specialised.values()) == set(range(p.n_families)):
            break
    else:
        raise GeneratorError(f"no supplier specialisation covering all families in {MAX_CATALOG_TRIES} draws")
    offered = {s: set() for s in suppliers}
    for k, fam in enumerate(families):
        makers = [s for s in suppliers if k in specialised[s]]
        for prod in sorted(fam):
            while True:
                hit = rng.random(len(makers)) < phi
                if hit.any():
                    break
            for s, h in zip(makers, hit):
                if h:
                    offered[s].add(prod)
    offers = {s: frozenset(v) for s, v in offered.items()}
    return ProductCatalog(products, families, offers, specialised)


def _earliest_periods(catalog: ProductCatalog, customers: list[str],
                      reach: dict[str, dict[str, int]]) -> dict[str, dict[str, int]]:
    """First period in which each product can reach each customer (departures start in period 1)."""
    index = catalog.supplier_index()
    out = {}
    for c in customers:
        out[c] = {}
        for prod in catalog.products:
            best = min((1 + reach[s][c] for s in index[prod] if c in reach[s]), default=None)
            if best is not None:
                out[c][prod] = best
    return out


def _demands(p: GeneratorParams, rng, customers: list[str], catalog: ProductCatalog,
             earliest: dict[str, dict[str, int]]) -> tuple[Demand, ...]:
    T = p.days * p.periods_per_day
    demands = []
    for c in customers:
        options = sorted(prod for prod, e in earliest[c].items() if e <= T)
        for _ in range(int(rng.poisson(p.demand_density * p.days))):
            prod = options[int(rng.integers(0, len(options)))]
            period = int(rng.integers(earliest[c][prod], T + 1))
            qty = int(rng.integers(p.quantity_range[0], p.quantity_range[1] + 1))
            demands.append(Demand(c, period, prod, float(qty)))
    return merge_demands(demands)


def generate(params: GeneratorParams) -> Instance:
    return _generate(params, params.phi)


def _generate(params: GeneratorParams, phi: float) -> Instance:
    rng = np.random.default_rng(params.seed)
    nodes, arcs, reach = _layout(params, rng)
    suppliers = [n.id for n in nodes if n.role == SUPPLIER]
    customers = [n.id for n in nodes if n.role == CUSTOMER]
    T = params.days * params.periods_per_day
    for _ in range(MAX_CATALOG_TRIES):
        catalog = _catalog(params, rng, suppliers, phi)
        earliest = _earliest_periods(catalog, customers, reach)
        if params.demand_density == 0 or all(any(e <= T for e in earliest[c].values()) for c in customers):
            break
    else:
        raise GeneratorError(f"infeasible params: some customer cannot be served in time by any offered product "
                             f"after {MAX_CATALOG_TRIES} catalog draws")
    demands = _demands(params, rng, customers, catalog, earliest)
    name = params.name or f"gen-n{params.n_nodes}-p{params.n_products}-f{params.n_families}-s{params.seed}"
    inst = Instance(tuple(nodes), tuple(arcs), catalog, demands, params.days, params.periods_per_day,
                    float(params.vehicle_capacity), name)
    report = validate_instance(inst)
    if not report.ok:
        raise GeneratorError(f"generated instance failed validation:\n{report}")
    return inst


def generate_exact_aggregatable(params: GeneratorParams, K: int) -> Instance:
    """Instance with ``K`` families whose suppliers offer all or nothing of each family."""
    if not 1 <= K <= params.n_products:
        raise GeneratorError(f"K={K} outside [1, {params.n_products}]")
    p = replace(params, n_families=K, phi=1.0,
                name=params.name or f"exact-n{params.n_nodes}-p{params.n_products}-k{K}-s{params.seed}")
    return _generate(p, 1.0)


def family_matching_rates(inst: Instance) -> list[float]:
    index = inst.catalog.supplier_index()
    return [set_matching_rate(sorted(f), inst.catalog, index) for f in inst.catalog.families if f]


def mean_family_matching_rate(inst: Instance) -> float:
    return float(np.mean(family_matching_rates(inst)))
