from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import catalog, fig34, fig56, small_params
from lsndp.generator import generate
from lsndp.partition import (PartitionError, ProductPartition, build_partition_sequence, distance_matrix,
                             family_partition, is_exact_subset, matching_rate, random_partition,
                             refine_to_exact, set_matching_rate, split_cost, two_medoids_split)

FIG = fig34().catalog  # supplier sets {s1}, {s1,s2}, {s2,s3}, {s3}


@st.composite
def catalogs(draw):
    n_p = draw(st.integers(2, 9))
    n_s = draw(st.integers(1, 5))
    products = [f"p{i}" for i in range(n_p)]
    offers = {f"s{j}": set() for j in range(n_s)}
    for p in products:
        chosen = draw(st.sets(st.integers(0, n_s - 1), min_size=1))
        for j in chosen:
            offers[f"s{j}"].add(p)
    return catalog([set(products)], offers)


def test_matching_rate_examples():
    cat56 = fig56().catalog
    assert matching_rate("p1", "p2", cat56) == 1.0
    assert matching_rate("p1", "p3", cat56) == 0.0
    assert matching_rate("p2", "p3", FIG) == pytest.approx(1 / 3)


def test_matching_rate_needs_suppliers():
    cat = catalog([{"a", "b"}], {"s": {"a"}})
    with pytest.raises(PartitionError):
        matching_rate("a", "b", cat)


def test_set_matching_rate_examples():
    assert set_matching_rate(["p3"], FIG) == 1.0
    assert set_matching_rate(["p1", "p2"], fig56().catalog) == 1.0
    cat = catalog([{"a", "b", "c"}], {"s1": {"a", "b", "c"}, "s2": {"a", "b"}, "s3": {"c"}})
    # pairs: (a,b)=1, (a,c)=1/3, (b,c)=1/3
    assert set_matching_rate(["a", "b", "c"], cat, exact=True) == Fraction(5, 9)
    with pytest.raises(PartitionError):
        set_matching_rate([], cat)


@given(catalogs())
def test_matching_rate_symmetric_and_reflexive(cat):
    for a, b in combinations(cat.products, 2):
        assert matching_rate(a, b, cat) == matching_rate(b, a, cat)
        assert 0.0 <= matching_rate(a, b, cat) <= 1.0
    for a in cat.products:
        assert matching_rate(a, a, cat) == 1.0


def test_two_medoids_on_figure_fixture():
    a, b = two_medoids_split(FIG.products, FIG)
    assert {a, b} == {("p1", "p2"), ("p3", "p4")}
    best = min(split_cost(FIG.products, m, FIG) for m in combinations(FIG.products, 2))
    assert split_cost(FIG.products, (a[0], b[0]), FIG) == pytest.approx(best) or \
        min(split_cost(FIG.products, (u, v), FIG) for u in a for v in b) == pytest.approx(best)


def test_two_medoids_small_cases():
    assert set(two_medoids_split(["p2", "p1"], FIG)) == {("p1",), ("p2",)}
    with pytest.raises(PartitionError):
        two_medoids_split(["p1"], FIG)
    same = catalog([{"a", "b", "c", "d"}], {"s": {"a", "b", "c", "d"}})
    first = two_medoids_split(same.products, same)
    assert first == two_medoids_split(list(reversed(same.products)), same)
    assert all(first)


@given(catalogs(), st.randoms())
def test_two_medoids_splits_and_ignores_input_order(cat, rnd):
    a, b = two_medoids_split(cat.products, cat)
    assert a and b and not set(a) & set(b) and set(a) | set(b) == set(cat.products)
    shuffled = list(cat.products)
    rnd.shuffle(shuffled)
    assert two_medoids_split(shuffled, cat) == (a, b)


def test_sequence_examples():
    seq = build_partition_sequence(FIG, 1)
    assert seq[1] == ProductPartition.whole(FIG.products)
    seq = build_partition_sequence(FIG, 2)
    assert set(seq[2].subsets) == {("p1", "p2"), ("p3", "p4")}
    seq = build_partition_sequence(FIG, 4)
    assert sorted(seq[4].subsets) == [("p1",), ("p2",), ("p3",), ("p4",)]
    with pytest.raises(PartitionError):
        build_partition_sequence(FIG, 5)


@given(st.integers(0, 300))
def test_sequence_is_a_refinement_chain(i):
    cat = generate(small_params(i)).catalog
    seq = build_partition_sequence(cat, len(cat.products))
    for K in range(1, seq.K_max + 1):
        part = seq[K]
        assert part.K == K
        part.check(cat.products)
        if K > 1:
            prev = seq[K - 1]
            assert part.refines(prev)
            assert len(set(part.subsets) - set(prev.subsets)) == 2
            split = (set(prev.subsets) - set(part.subsets)).pop()
            assert len(split) == max(len(s) for s in prev.subsets)


def test_refine_examples():
    same = catalog([{"a", "b", "c"}], {"s": {"a", "b", "c"}})
    assert refine_to_exact(same) == ProductPartition.whole(["a", "b", "c"])
    disjoint = catalog([{"a", "b", "c"}], {"s1": {"a"}, "s2": {"b"}, "s3": {"c"}})
    assert sorted(refine_to_exact(disjoint).subsets) == [("a",), ("b",), ("c",)]
    assert set(refine_to_exact(fig56().catalog).subsets) == {("p1", "p2"), ("p3", "p4")}


@given(catalogs())
def test_refined_subsets_have_rate_one_and_identical_suppliers(cat):
    part = refine_to_exact(cat)
    part.check(cat.products)
    index = cat.supplier_index()
    for sub in part.subsets:
        assert set_matching_rate(sub, cat, exact=True) == 1
        assert is_exact_subset(sub, index)


@given(catalogs())
def test_rate_one_iff_identical_supplier_sets(cat):
    index = cat.supplier_index()
    for r in range(2, min(4, len(cat.products)) + 1):
        for sub in combinations(cat.products, r):
            assert (set_matching_rate(sub, cat, exact=True) == 1) == is_exact_subset(sub, index)


def test_partition_checks_and_json():
    part = ProductPartition.of([["b", "a"], ["c"]])
    assert part.subsets == (("a", "b"), ("c",))
    assert ProductPartition.from_json(part.to_json()) == part
    part.check(["a", "b", "c"])
    for bad in ([["a"], ["a", "b", "c"]], [["a"], []], [["a", "b"]]):
        with pytest.raises(PartitionError):
            ProductPartition.of(bad).check(["a", "b", "c"])


def test_family_and_random_partitions():
    inst = generate(small_params(7))
    fp = family_partition(inst.catalog)
    fp.check(inst.products)
    rp = random_partition(inst.products, 3, np.random.default_rng(1))
    assert rp.K == 3
    rp.check(inst.products)
    assert rp == random_partition(inst.products, 3, np.random.default_rng(1))
