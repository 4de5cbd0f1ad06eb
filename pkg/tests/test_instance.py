import json

import pytest
from hypothesis import given, strategies as st

from helpers import catalog, small_params, three_node, toy
from lsndp.generator import generate
from lsndp.instance import (Arc, Demand, Instance, InstanceError, Node, dumps_instance, instance_from_dict,
                            instance_to_dict, load_instance, merge_demands, save_instance, validate_instance)


def write(tmp_path, data, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_minimal_file_loads(tmp_path):
    inst = load_instance(write(tmp_path, instance_to_dict(three_node())))
    assert len(inst.nodes) == 3
    assert inst.horizon_periods == 4
    assert validate_instance(inst).ok


def test_customer_to_warehouse_arc_rejected(tmp_path):
    data = instance_to_dict(three_node())
    data["arcs"].append({"from": "c", "to": "w", "travel_time_hours": 5, "unit_flow_cost": 1,
                         "fixed_vehicle_cost": 1})
    with pytest.raises(InstanceError, match="echelon rule"):
        load_instance(write(tmp_path, data))


def test_product_in_two_families_rejected(tmp_path):
    data = instance_to_dict(three_node())
    data["families"] = [["p"], ["p"]]
    with pytest.raises(InstanceError, match="family partition"):
        load_instance(write(tmp_path, data))


def test_malformed_file_is_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nodes: ")
    with pytest.raises(InstanceError, match="parse error"):
        load_instance(path)
    with pytest.raises(InstanceError, match="parse error"):
        load_instance(write(tmp_path, {"nodes": []}))


def test_valid_instance_has_empty_report():
    assert len(validate_instance(toy())) == 0


def test_unsourceable_product_reported():
    base = toy()
    cat = catalog([{"p"}, {"q"}], {"s": {"p"}})
    inst = Instance(base.nodes, base.arcs, cat, base.demands + (Demand("c", 2, "q", 1.0),), 1, 2, 10.0)
    assert "unsourceable product" in validate_instance(inst).codes()


def test_offer_outside_specialisation_reported():
    base = toy()
    cat = catalog([{"p"}, {"q"}], {"s": {"p", "q"}}, supplier_families={"s": frozenset({0})})
    inst = Instance(base.nodes, base.arcs, cat, base.demands, 1, 2, 10.0)
    assert "supplier specialisation" in validate_instance(inst).codes()


def test_more_than_three_families_reported():
    base = toy()
    fams = [{f"p{i}"} for i in range(4)]
    cat = catalog(fams, {"s": {f"p{i}" for i in range(4)}})
    inst = Instance(base.nodes, base.arcs, cat, (), 1, 2, 10.0)
    assert "supplier specialisation" in validate_instance(inst).codes()


def test_structural_checks():
    base = toy()
    bad = Instance(base.nodes + (Node("x", "warehouse"),), base.arcs, base.catalog, base.demands, 1, 1, 0.0)
    codes = validate_instance(bad).codes()
    assert {"warehouse storage", "vehicle capacity", "horizon", "demand period"} <= codes


def test_duplicate_demands_are_summed(tmp_path):
    data = instance_to_dict(toy())
    data["demands"].append(dict(data["demands"][0]))
    inst = load_instance(write(tmp_path, data))
    assert inst.demand_map() == {("c", 2, "p"): 10.0}
    assert merge_demands([Demand("c", 1, "p", 1.0), Demand("c", 1, "p", 2.5)]) == (Demand("c", 1, "p", 3.5),)


def test_families_partition_products():
    inst = generate(small_params(3))
    fams = inst.catalog.families
    for i in range(len(fams)):
        for j in range(i + 1, len(fams)):
            assert not fams[i] & fams[j]
    assert frozenset().union(*fams) == frozenset(inst.products)


@given(st.integers(0, 40))
def test_save_load_round_trip(tmp_path_factory, i):
    inst = generate(small_params(i))
    path = tmp_path_factory.mktemp("rt") / "i.json"
    save_instance(inst, path)
    again = load_instance(path)
    assert again == inst
    assert dumps_instance(again) == dumps_instance(inst)


def test_from_dict_without_validation_keeps_bad_data():
    data = instance_to_dict(toy())
    data["vehicle_capacity"] = -1
    inst = instance_from_dict(data, validate=False)
    assert inst.vehicle_capacity == -1
    with pytest.raises(InstanceError, match="validation error"):
        instance_from_dict(data)
