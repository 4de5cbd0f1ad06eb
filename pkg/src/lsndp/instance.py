"""LSNDP instance model, JSON file format and structural validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

SUPPLIER = "supplier"
WAREHOUSE = "warehouse"
CUSTOMER = "customer"
ROLES = (SUPPLIER, WAREHOUSE, CUSTOMER)

ALLOWED_ECHELONS = {
    (SUPPLIER, WAREHOUSE),
    (SUPPLIER, CUSTOMER),
    (WAREHOUSE, WAREHOUSE),
    (WAREHOUSE, CUSTOMER),
}

SCHEMA_KEYS = ("nodes", "arcs", "products", "families", "supplier_offers",
               "demands", "days", "periods_per_day", "vehicle_capacity")


class InstanceError(ValueError):
    """Raised when an instance file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Node:
    id: str
    role: str
    storage_cost: float | None = None
    storage_capacity: float | None = None


@dataclass(frozen=True)
class Arc:
    origin: str
    dest: str
    travel_time_hours: float
    unit_flow_cost: float
    fixed_vehicle_cost: float


@dataclass(frozen=True)
class ProductCatalog:
    products: tuple[str, ...]
    families: tuple[frozenset[str], ...]
    supplier_offers: dict[str, frozenset[str]]
    # optional: supplier -> indices of the families it specialises in
    supplier_families: dict[str, frozenset[int]] | None = None

    def suppliers_of(self, product: str) -> frozenset[str]:
        return self.supplier_index().get(product, frozenset())

    def supplier_index(self) -> dict[str, frozenset[str]]:
        """Map product -> set of suppliers offering it (``S^p``)."""
        index: dict[str, set[str]] = {p: set() for p in self.products}
        for s, offered in self.supplier_offers.items():
            for p in offered:
                index.setdefault(p, set()).add(s)
        return {p: frozenset(v) for p, v in index.items()}

    def family_of(self, product: str) -> int:
        for k, fam in enumerate(self.families):
            if product in fam:
                return k
        raise KeyError(product)


@dataclass(frozen=True)
class Demand:
    customer: str
    period: int
    product: str
    quantity: float


@dataclass(frozen=True)
class Instance:
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    catalog: ProductCatalog
    demands: tuple[Demand, ...]
    days: int
    periods_per_day: int
    vehicle_capacity: float
    name: str = "instance"
    _node_map: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_node_map", {n.id: n for n in self.nodes})

    @property
    def horizon_periods(self) -> int:
        return self.days * self.periods_per_day

    @property
    def hours_per_period(self) -> float:
        return 24.0 / self.periods_per_day

    def node(self, node_id: str) -> Node:
        return self._node_map[node_id]

    def nodes_with_role(self, role: str) -> list[Node]:
        return [n for n in self.nodes if n.role == role]

    @property
    def products(self) -> tuple[str, ...]:
        return self.catalog.products

    def demand_map(self) -> dict[tuple[str, int, str], float]:
        return {(d.customer, d.period, d.product): d.quantity for d in self.demands}


@dataclass
class ValidationIssue:
    code: str
    location: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.location}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    def add(self, code: str, location: str, message: str) -> None:
        self.issues.append(ValidationIssue(code, location, message))

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def __bool__(self):
        return bool(self.issues)

    def __len__(self):
        return len(self.issues)

    def __str__(self):
        return "\n".join(str(i) for i in self.issues) or "ok"


def validate_instance(inst: Instance) -> ValidationReport:
    """Collect every violated invariant; an empty report means the instance is valid."""
    report = ValidationReport()
    ids = [n.id for n in inst.nodes]
    if len(set(ids)) != len(ids):
        report.add("duplicate node", "nodes", "node ids are not unique")
    roles = {n.id: n.role for n in inst.nodes}

    for n in inst.nodes:
        if n.role not in ROLES:
            report.add("node role", f"node {n.id}", f"unknown role {n.role!r}")
            continue
        has_storage = n.storage_cost is not None or n.storage_capacity is not None
        if n.role == WAREHOUSE:
            if n.storage_cost is None or n.storage_capacity is None:
                report.add("warehouse storage", f"node {n.id}", "warehouse needs storage_cost and storage_capacity")
            elif n.storage_capacity < 0 or n.storage_cost < 0:
                report.add("warehouse storage", f"node {n.id}", "storage cost/capacity must be non-negative")
        elif has_storage:
            report.add("warehouse storage", f"node {n.id}", f"{n.role} must not carry storage fields")

    seen_arcs = set()
    for a in inst.arcs:
        loc = f"arc {a.origin}->{a.dest}"
        if a.origin not in roles or a.dest not in roles:
            report.add("unknown node", loc, "arc endpoint is not a declared node")
            continue
        if (roles[a.origin], roles[a.dest]) not in ALLOWED_ECHELONS:
            report.add("echelon rule", loc, f"{roles[a.origin]} -> {roles[a.dest]} is not allowed")
        if a.origin == a.dest:
            report.add("echelon rule", loc, "self-loop")
        if (a.origin, a.dest) in seen_arcs:
            report.add("duplicate arc", loc, "arc declared twice")
        seen_arcs.add((a.origin, a.dest))
        for attr in ("travel_time_hours", "unit_flow_cost", "fixed_vehicle_cost"):
            if not getattr(a, attr) > 0:
                report.add("arc attribute", loc, f"{attr} must be > 0")

    cat = inst.catalog
    products = set(cat.products)
    if len(products) != len(cat.products):
        report.add("duplicate product", "products", "product ids are not unique")
    union: set[str] = set()
    for k, fam in enumerate(cat.families):
        overlap = union & fam
        if overlap:
            report.add("family partition", f"family {k}", f"products in several families: {sorted(overlap)}")
        union |= fam
        unknown = fam - products
        if unknown:
            report.add("family partition", f"family {k}", f"unknown products {sorted(unknown)}")
    missing = products - union
    if missing:
        report.add("family partition", "families", f"products in no family: {sorted(missing)}")

    for s, offered in cat.supplier_offers.items():
        if roles.get(s) != SUPPLIER:
            report.add("supplier offers", f"supplier {s}", "offers listed for a non-supplier")
            continue
        unknown = offered - products
        if unknown:
            report.add("supplier offers", f"supplier {s}", f"offers unknown products {sorted(unknown)}")
        fams = {k for k, fam in enumerate(cat.families) if fam & offered}
        if cat.supplier_families is not None:
            allowed = cat.supplier_families.get(s, frozenset())
            outside = fams - set(allowed)
            if outside:
                report.add("supplier specialisation", f"supplier {s}",
                           f"offers products of families {sorted(outside)} outside its specialisation")
            fams = fams | set(allowed)
        if len(fams) > 3:
            report.add("supplier specialisation", f"supplier {s}",
                       f"offers products of {len(fams)} families (at most 3)")

    if inst.vehicle_capacity <= 0:
        report.add("vehicle capacity", "vehicle_capacity", "must be > 0")
    if inst.days < 1 or inst.periods_per_day < 1:
        report.add("horizon", "days/periods_per_day", "must be positive integers")
    if inst.horizon_periods < 2:
        report.add("horizon", "horizon_periods", "must be at least 2")

    sourced = set().union(*cat.supplier_offers.values()) if cat.supplier_offers else set()
    triples = set()
    for d in inst.demands:
        loc = f"demand ({d.customer}, {d.period}, {d.product})"
        if roles.get(d.customer) != CUSTOMER:
            report.add("demand customer", loc, "demand at a non-customer node")
        if not 1 <= d.period <= inst.horizon_periods:
            report.add("demand period", loc, f"period outside [1, {inst.horizon_periods}]")
        if not d.quantity > 0:
            report.add("demand quantity", loc, "quantity must be > 0")
        if d.product not in products:
            report.add("demand product", loc, "unknown product")
        elif d.product not in sourced:
            report.add("unsourceable product", loc, "no supplier offers this product")
        key = (d.customer, d.period, d.product)
        if key in triples:
            report.add("duplicate demand", loc, "demand triple repeated")
        triples.add(key)
    return report


def merge_demands(demands: Iterable[Demand]) -> tuple[Demand, ...]:
    """Sum quantities of repeated (customer, period, product) triples; keeps first-seen order."""
    totals: dict[tuple[str, int, str], float] = {}
    for d in demands:
        key = (d.customer, d.period, d.product)
        totals[key] = totals.get(key, 0.0) + d.quantity
    return tuple(Demand(c, t, p, q) for (c, t, p), q in totals.items())


def instance_to_dict(inst: Instance) -> dict:
    nodes = []
    for n in inst.nodes:
        entry = {"id": n.id, "role": n.role}
        if n.role == WAREHOUSE:
            entry["storage_cost"] = n.storage_cost
            entry["storage_capacity"] = n.storage_capacity
        nodes.append(entry)
    return {
        "name": inst.name,
        "nodes": nodes,
        "arcs": [{"from": a.origin, "to": a.dest, "travel_time_hours": a.travel_time_hours,
                  "unit_flow_cost": a.unit_flow_cost, "fixed_vehicle_cost": a.fixed_vehicle_cost}
                 for a in inst.arcs],
        "products": list(inst.catalog.products),
        "families": [sorted(f) for f in inst.catalog.families],
        "supplier_offers": {s: sorted(p) for s, p in sorted(inst.catalog.supplier_offers.items())},
        **({"supplier_families": {s: sorted(f) for s, f in sorted(inst.catalog.supplier_families.items())}}
           if inst.catalog.supplier_families is not None else {}),
        "demands": [{"customer": d.customer, "period": d.period, "product": d.product, "quantity": d.quantity}
                    for d in inst.demands],
        "days": inst.days,
        "periods_per_day": inst.periods_per_day,
        "vehicle_capacity": inst.vehicle_capacity,
    }


def instance_from_dict(data: dict, name: str | None = None, validate: bool = True) -> Instance:
    missing = [k for k in SCHEMA_KEYS if k not in data]
    if missing:
        raise InstanceError(f"parse error: missing keys {missing}")
    try:
        nodes = tuple(Node(str(n["id"]), n["role"],
                           _opt_float(n.get("storage_cost")), _opt_float(n.get("storage_capacity")))
                      for n in data["nodes"])
        arcs = tuple(Arc(str(a["from"]), str(a["to"]), float(a["travel_time_hours"]),
                         float(a["unit_flow_cost"]), float(a["fixed_vehicle_cost"]))
                     for a in data["arcs"])
        catalog = ProductCatalog(
            products=tuple(str(p) for p in data["products"]),
            families=tuple(frozenset(str(p) for p in f) for f in data["families"]),
            supplier_offers={str(s): frozenset(str(p) for p in ps)
                             for s, ps in data["supplier_offers"].items()},
            supplier_families=({str(s): frozenset(int(k) for k in ks)
                                for s, ks in data["supplier_families"].items()}
                               if data.get("supplier_families") is not None else None),
        )
        demands = merge_demands(Demand(str(d["customer"]), int(d["period"]), str(d["product"]),
                                       float(d["quantity"])) for d in data["demands"])
        inst = Instance(nodes=nodes, arcs=arcs, catalog=catalog, demands=demands,
                        days=int(data["days"]), periods_per_day=int(data["periods_per_day"]),
                        vehicle_capacity=float(data["vehicle_capacity"]),
                        name=name or data.get("name", "instance"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"parse error: {exc}") from exc
    if validate:
        report = validate_instance(inst)
        if report:
            raise InstanceError("validation error:\n" + str(report))
    return inst


def _opt_float(v):
    return None if v is None else float(v)


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"parse error: {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError(f"parse error: {path}: top level must be an object")
    return instance_from_dict(data, name=data.get("name", path.stem))


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=False) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))
