"""Hand-built fixtures, small generated batches and an independent LSNDP oracle."""

from __future__ import annotations

from lsndp.backend import HighsBackend
from lsndp.generator import GeneratorParams, generate, generate_exact_aggregatable
from lsndp.instance import Arc, Demand, Instance, Node, ProductCatalog
from lsndp.models import build_lsndp, extract_flows, extract_vehicles, flow_cost
from lsndp.timegraph import expand

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def catalog(families, offers, supplier_families=None) -> ProductCatalog:
    products = tuple(sorted(p for f in families for p in f))
    return ProductCatalog(products, tuple(frozenset(f) for f in families),
                          {s: frozenset(v) for s, v in offers.items()}, supplier_families)


def toy(demand: float = 5.0) -> Instance:
    """One supplier, one customer, one 12h arc (one period at 2 periods/day); u=10, f=100, c=1."""
    nodes = (Node("s", "supplier"), Node("c", "customer"))
    arcs = (Arc("s", "c", 12.0, 1.0, 100.0),)
    demands = (Demand("c", 2, "p", demand),) if demand > 0 else ()
    return Instance(nodes, arcs, catalog([{"p"}], {"s": {"p"}}), demands, 1, 2, 10.0, f"toy-{demand:g}")


def three_node() -> Instance:
    nodes = (Node("s", "supplier"), Node("w", "warehouse", 0.5, 100.0), Node("c", "customer"))
    arcs = (Arc("s", "w", 12.0, 1.0, 10.0), Arc("w", "c", 12.0, 1.0, 10.0))
    return Instance(nodes, arcs, catalog([{"p"}], {"s": {"p"}}), (Demand("c", 4, "p", 3.0),), 2, 2, 10.0, "min3")


def star(offers: dict[str, set[str]], families, demand: float = 1.0, name: str = "star") -> Instance:
    """Suppliers each linked directly to one customer ``c``; unit demand of every product at period 2."""
    sup = sorted(offers)
    nodes = tuple(Node(s, "supplier") for s in sup) + (Node("c", "customer"),)
    arcs = tuple(Arc(s, "c", 12.0, 1.0 + i, 20.0 + 5 * i) for i, s in enumerate(sup))
    cat = catalog(families, offers)
    demands = tuple(Demand("c", 2, p, demand) for p in cat.products)
    return Instance(nodes, arcs, cat, demands, 1, 2, 10.0, name)


def fig34() -> Instance:
    """s1 makes p1,p2; s2 makes p2,p3; s3 makes p3,p4."""
    return star({"s1": {"p1", "p2"}, "s2": {"p2", "p3"}, "s3": {"p3", "p4"}},
                [{"p1", "p2"}, {"p3", "p4"}], name="fig34")


def fig56() -> Instance:
    """p1,p2 offered by s1 and s2; p3,p4 by s3 and s4."""
    return star({"s1": {"p1", "p2"}, "s2": {"p1", "p2"}, "s3": {"p3", "p4"}, "s4": {"p3", "p4"}},
                [{"p1", "p2"}, {"p3", "p4"}], name="fig56")


def small_params(i: int) -> GeneratorParams:
    """Oracle-sized instance ``i``: |N| <= 12, |P| <= 8, D <= 3, 2 periods per day."""
    return GeneratorParams(n_nodes=8 + i % 5, n_products=4 + i % 5, n_families=2 + i % 3, days=2 + i % 2,
                           periods_per_day=2, phi=(0.4, 0.6, 0.8)[i % 3], demand_density=1.0 + 0.5 * (i % 3),
                           seed=1000 + i)


def small_batch(n: int = 20) -> list[Instance]:
    return [generate(small_params(i)) for i in range(n)]


def exact_batch(n: int = 10) -> list[Instance]:
    return [generate_exact_aggregatable(small_params(i), 2 + i % 3) for i in range(n)]


def oracle(inst: Instance, graph=None):
    """Direct MILP solved to optimality; returns (objective, y, x)."""
    graph = graph or expand(inst)
    res = HighsBackend().solve_milp(build_lsndp(graph, inst), rel_gap=0.0)
    assert res.status == "optimal", res.status
    return res.objective, extract_vehicles(res, graph), extract_flows(res)


def oracle_point(inst: Instance, graph=None):
    """(y*, z*) of the oracle optimum, z* being its flow cost."""
    graph = graph or expand(inst)
    obj, y, x = oracle(inst, graph)
    return obj, y, flow_cost(graph, x)
