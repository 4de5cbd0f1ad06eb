import math

import highspy
import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import small_params, toy
from lsndp.backend import (FEASIBLE_AT_LIMIT, INFEASIBLE, LIMIT_NO_SOLUTION, OPTIMAL, HighsBackend, LinearModel,
                           ScipyBackend, check_ray, get_backend, phase_one_ray, reduced_costs, write_lp_file)
from lsndp.generator import generate
from lsndp.models import build_lsndp
from lsndp.timegraph import expand

BACKENDS = [HighsBackend(), ScipyBackend()]
ids = [b.name for b in BACKENDS]


def one_var(*rows):
    m = LinearModel()
    x = m.add_var("x", obj=1.0)
    for i, (sense, rhs) in enumerate(rows):
        m.add_constr(("r", i), [(x, 1.0)], sense, rhs)
    return m


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
def test_single_covering_row(backend):
    res = backend.solve_lp(one_var((">=", 5.0)))
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(5.0)
    assert res.dual(("r", 0)) == pytest.approx(1.0)


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
def test_contradictory_bounds_give_ray(backend):
    m = one_var((">=", 5.0), ("<=", 3.0))
    res = backend.solve_lp(m)
    assert res.status == INFEASIBLE
    ray = res.infeasibility_ray
    assert ray[("r", 0)] > 0 and ray[("r", 1)] < 0  # positive weight on both, in the sign convention
    assert check_ray(m, res.ray_values)
    assert res.ray_source == ("farkas" if backend.supports_rays else "phase-one")


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
def test_zero_objective(backend):
    m = LinearModel()
    x = m.add_var("x")
    m.add_constr("r", [(x, 1.0)], ">=", 2.0)
    assert backend.solve_lp(m).objective == pytest.approx(0.0)


def random_covering(seed, n=6, m=5, infeasible=False):
    rng = np.random.default_rng(seed)
    model = LinearModel()
    xs = [model.add_var(("x", j), obj=float(rng.uniform(0.5, 3))) for j in range(n)]
    for i in range(m):
        cols = rng.choice(n, size=3, replace=False)
        model.add_constr(("cover", i), [(xs[j], float(rng.uniform(0.5, 2))) for j in cols], ">=",
                         float(rng.uniform(1, 5)))
    eq_cols = rng.choice(n, size=2, replace=False)
    model.add_constr("eq", [(xs[j], 1.0) for j in eq_cols], "=", float(rng.uniform(1, 4)))
    if infeasible:
        model.add_constr("budget", [(x, 1.0) for x in xs], "<=", 0.1)
    return model


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
@given(seed=st.integers(0, 10_000))
def test_duals_are_dual_feasible(backend, seed):
    model = random_covering(seed)
    res = backend.solve_lp(model)
    assert res.status == OPTIMAL
    rc = reduced_costs(model, res.row_duals)
    assert rc.min() >= -1e-6
    for s, v in zip(model.sense, res.row_duals):
        assert (s != ">=" or v >= -1e-9) and (s != "<=" or v <= 1e-9)
    assert float(np.dot(model.rhs, res.row_duals)) == pytest.approx(res.objective, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
@given(seed=st.integers(0, 10_000))
def test_rays_certify_infeasibility(backend, seed):
    model = random_covering(seed, infeasible=True)
    res = backend.solve_lp(model)
    assert res.status == INFEASIBLE
    assert res.ray_values is not None and check_ray(model, res.ray_values)


def test_phase_one_ray_on_feasible_model_is_none():
    assert phase_one_ray(random_covering(1), HighsBackend()) is None


def test_check_ray_rejects_non_certificates():
    m = one_var((">=", 5.0), ("<=", 3.0))
    assert not check_ray(m, np.array([1.0, 0.0]))
    assert not check_ray(m, np.array([-1.0, 1.0]))
    assert not check_ray(m, np.zeros(2))


@pytest.mark.parametrize("backend", BACKENDS, ids=ids)
def test_toy_milp(backend):
    inst = toy()
    model = build_lsndp(expand(inst), inst)
    res = backend.solve_milp(model, rel_gap=0.0)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(105.0)
    assert res.value(("y", 0)) == pytest.approx(1.0)
    assert res.value(("x", 0, "p")) == pytest.approx(5.0)


def test_warm_start_with_optimum():
    inst = toy()
    model = build_lsndp(expand(inst), inst)
    res = HighsBackend().solve_milp(model, rel_gap=0.0, initial={("y", 0): 1, ("x", 0, "p"): 5.0}, cutoff=105.0)
    assert res.status == OPTIMAL and res.objective == pytest.approx(105.0)


def test_time_limit_is_never_reported_optimal():
    params = small_params(0).__class__(n_nodes=30, n_products=20, n_families=5, days=5, periods_per_day=4,
                                       demand_density=4, seed=9)
    inst = generate(params)
    res = HighsBackend().solve_milp(build_lsndp(expand(inst), inst), time_limit=0.001, rel_gap=0.0)
    assert res.status in (FEASIBLE_AT_LIMIT, LIMIT_NO_SOLUTION)


def test_lp_file_round_trip(tmp_path):
    inst = generate(small_params(4))
    model = build_lsndp(expand(inst), inst)
    names = write_lp_file(model, tmp_path / "m.lp")
    assert len(names) == model.num_vars + model.num_rows
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    assert h.readModel(str(tmp_path / "m.lp")) == highspy.HighsStatus.kOk
    h.run()
    ours = HighsBackend().solve_milp(model, rel_gap=0.0)
    assert h.getInfo().objective_function_value == pytest.approx(ours.objective, rel=1e-7)


def test_get_backend(monkeypatch):
    monkeypatch.setenv("LSNDP_BACKEND", "scipy")
    assert get_backend().name == "scipy"
    assert get_backend("highs").name == "highs"
    with pytest.raises(ValueError):
        get_backend("nope")


def test_model_validation():
    m = LinearModel()
    x = m.add_var("x")
    with pytest.raises(ValueError):
        m.add_var("x")
    with pytest.raises(ValueError):
        m.add_constr("r", [(x, 1.0)], "<", 1.0)
    with pytest.raises(ValueError):
        m.add_var("y", lb=2, ub=1)
    with pytest.raises((ValueError, IndexError)):
        m.add_constr("r2", [(5, 1.0)], "<=", 1.0)
    with pytest.raises(ValueError):
        HighsBackend().solve_lp(build_lsndp(expand(toy()), toy()))
