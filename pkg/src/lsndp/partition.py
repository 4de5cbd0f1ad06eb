"""Product partitions: matching rates, 2-medoids splits and partition chains."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .instance import ProductCatalog


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class ProductPartition:
    """Ordered list of disjoint, non-empty product subsets."""

    subsets: tuple[tuple[str, ...], ...]

    @classmethod
    def of(cls, subsets: Iterable[Iterable[str]]) -> "ProductPartition":
        return cls(tuple(tuple(sorted(s)) for s in subsets))

    @classmethod
    def whole(cls, products: Iterable[str]) -> "ProductPartition":
        return cls.of([products])

    @classmethod
    def singletons(cls, products: Iterable[str]) -> "ProductPartition":
        return cls.of([[p] for p in sorted(products)])

    @property
    def K(self) -> int:
        return len(self.subsets)

    def __len__(self):
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)

    def index_of(self) -> dict[str, int]:
        return {p: k for k, sub in enumerate(self.subsets) for p in sub}

    def check(self, products: Iterable[str]) -> None:
        products = set(products)
        seen: set[str] = set()
        for k, sub in enumerate(self.subsets):
            if not sub:
                raise PartitionError(f"subset {k} is empty")
            dup = seen & set(sub)
            if dup or len(set(sub)) != len(sub):
                raise PartitionError(f"products {sorted(dup)} appear in several subsets")
            seen |= set(sub)
        if seen != products:
            raise PartitionError(f"not a partition of the product set: missing {sorted(products - seen)}, "
                                 f"unknown {sorted(seen - products)}")

    def to_json(self) -> list[list[str]]:
        return [list(s) for s in self.subsets]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[str]]) -> "ProductPartition":
        return cls(tuple(tuple(s) for s in data))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def refines(self, coarser: "ProductPartition") -> bool:
        """True when every subset here lies inside one subset of ``coarser``."""
        where = coarser.index_of()
        return all(len({where[p] for p in sub}) == 1 for sub in self.subsets)


def _jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def matching_rate(p_i: str, p_j: str, catalog: ProductCatalog,
                  index: Mapping[str, frozenset] | None = None) -> float:
    """Jaccard index of the supplier sets of two products."""
    index = index if index is not None else catalog.supplier_index()
    a, b = index.get(p_i, frozenset()), index.get(p_j, frozenset())
    if not a or not b:
        raise PartitionError(f"product {p_i if not a else p_j} has no supplier")
    return _jaccard(a, b)


def set_matching_rate(subset: Sequence[str], catalog: ProductCatalog,
                      index: Mapping[str, frozenset] | None = None, exact: bool = False):
    """Mean pairwise matching rate; singletons score 1.

    Products nobody offers have an empty supplier set and are treated as
    matching each other perfectly and everything else not at all.
    ``exact=True`` returns a :class:`~fractions.Fraction`.
    """
    index = index if index is not None else catalog.supplier_index()
    subset = list(subset)
    if not subset:
        raise PartitionError("empty subset")
    if len(subset) == 1:
        return Fraction(1) if exact else 1.0
    total = Fraction(0)
    pairs = 0
    for a, b in combinations(subset, 2):
        sa, sb = index.get(a, frozenset()), index.get(b, frozenset())
        union = sa | sb
        total += Fraction(len(sa & sb), len(union)) if union else Fraction(1)
        pairs += 1
    mean = total / pairs
    return mean if exact else float(mean)


def distance_matrix(products: Sequence[str], catalog: ProductCatalog,
                    index: Mapping[str, frozenset] | None = None) -> list[list[float]]:
    index = index if index is not None else catalog.supplier_index()
    n = len(products)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = 1.0 - _jaccard(index.get(products[i], frozenset()), index.get(products[j], frozenset()))
            d[i][j] = d[j][i] = v
    return d


def _assign(d, medoids):
    """Cost and cluster labels; ties go to the first medoid."""
    labels, cost = [], 0.0
    for i in range(len(d)):
        best = min(range(len(medoids)), key=lambda m: (d[i][medoids[m]], m))
        labels.append(best)
        cost += d[i][medoids[best]]
    for m, med in enumerate(medoids):
        labels[med] = m
    return cost, labels


def two_medoids_split(subset: Sequence[str], catalog: ProductCatalog,
                      index: Mapping[str, frozenset] | None = None) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split ``subset`` in two with k-medoids (k=2) on distance ``1 - matching rate``.

    Medoids start at the farthest pair (lexicographic tie-break), then the best
    improving medoid/non-medoid swap is applied until none improves the total
    distance. Deterministic.
    """
    items = sorted(subset)
    n = len(items)
    if n < 2:
        raise PartitionError("cannot split a subset with fewer than two products")
    d = distance_matrix(items, catalog, index)
    far = max(((i, j) for i in range(n) for j in range(i + 1, n)),
              key=lambda ij: (d[ij[0]][ij[1]], -ij[0], -ij[1]))
    medoids = list(far)
    cost, labels = _assign(d, medoids)
    while True:
        best = None
        for m in range(2):
            for o in range(n):
                if o in medoids:
                    continue
                trial = list(medoids)
                trial[m] = o
                trial_cost, trial_labels = _assign(d, sorted(trial))
                if trial_cost < cost - 1e-12 and (best is None or trial_cost < best[0] - 1e-12):
                    best = (trial_cost, sorted(trial), trial_labels)
        if best is None:
            break
        cost, medoids, labels = best
    a = tuple(items[i] for i in range(n) if labels[i] == 0)
    b = tuple(items[i] for i in range(n) if labels[i] == 1)
    return a, b


def split_cost(subset: Sequence[str], medoids: tuple[str, str], catalog: ProductCatalog) -> float:
    """Total distance to the closer of two medoids (used by the exhaustive oracle in tests)."""
    index = catalog.supplier_index()
    return sum(min(1 - _jaccard(index[p], index[m]) for m in medoids) for p in subset)


def _largest(partition: ProductPartition) -> int:
    return min(range(partition.K), key=lambda k: (-len(partition.subsets[k]), partition.subsets[k]))


def _replace(partition: ProductPartition, k: int, a, b) -> ProductPartition:
    subs = list(partition.subsets)
    subs[k:k + 1] = [tuple(sorted(a)), tuple(sorted(b))]
    return ProductPartition(tuple(subs))


@dataclass(frozen=True)
class PartitionSequence:
    partitions: tuple[ProductPartition, ...]

    def __getitem__(self, K: int) -> ProductPartition:
        """Partition with ``K`` subsets (1-based)."""
        if not 1 <= K <= len(self.partitions):
            raise KeyError(K)
        return self.partitions[K - 1]

    def __len__(self):
        return len(self.partitions)

    @property
    def K_max(self) -> int:
        return len(self.partitions)


def build_partition_sequence(catalog: ProductCatalog, K_max: int) -> PartitionSequence:
    """Chain of partitions with 1..K_max subsets; each step 2-medoids-splits the largest subset."""
    n = len(catalog.products)
    if not 1 <= K_max <= n:
        raise PartitionError(f"K_max={K_max} outside [1, {n}]")
    index = catalog.supplier_index()
    current = ProductPartition.whole(catalog.products)
    chain = [current]
    while current.K < K_max:
        k = _largest(current)
        a, b = two_medoids_split(current.subsets[k], catalog, index)
        current = _replace(current, k, a, b)
        chain.append(current)
    return PartitionSequence(tuple(chain))


def is_exact_subset(subset: Sequence[str], index: Mapping[str, frozenset]) -> bool:
    """All members share one supplier set (the lossless-aggregation premise)."""
    first = index.get(subset[0], frozenset())
    return all(index.get(p, frozenset()) == first for p in subset[1:])


def refine_to_exact(catalog: ProductCatalog) -> ProductPartition:
    """Split subsets until every one has matching rate 1 (identical supplier sets)."""
    index = catalog.supplier_index()
    current = ProductPartition.whole(catalog.products)
    while True:
        for k, sub in enumerate(current.subsets):
            if not is_exact_subset(sub, index):
                a, b = two_medoids_split(sub, catalog, index)
                current = _replace(current, k, a, b)
                break
        else:
            return current


def family_partition(catalog: ProductCatalog) -> ProductPartition:
    return ProductPartition.of(f for f in catalog.families if f)


def random_partition(products: Sequence[str], K: int, rng) -> ProductPartition:
    """Uniformly random K-partition (every subset non-empty); ``rng`` is a numpy Generator."""
    products = sorted(products)
    if not 1 <= K <= len(products):
        raise PartitionError(f"K={K} outside [1, {len(products)}]")
    order = [products[i] for i in rng.permutation(len(products))]
    labels = list(range(K)) + [int(v) for v in rng.integers(0, K, size=len(products) - K)]
    subsets = [[] for _ in range(K)]
    for p, lab in zip(order, labels):
        subsets[lab].append(p)
    return ProductPartition.of(subsets)
