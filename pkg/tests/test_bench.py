import json

import pytest

import lsndp.bench as bench
from helpers import small_params, toy
from lsndp.bench import (ExperimentConfig, RunRecord, compute_indicators, load_records, read_records_csv,
                         relative_gap, root_study, run_experiment, run_method)
from lsndp.cli import main
from lsndp.generator import generate, generate_exact_aggregatable
from lsndp.instance import Demand, Instance, save_instance


def rec(inst, method, ub, lb, **kw):
    return RunRecord(inst, method, ub, lb, relative_gap(ub, lb), 1.0, **kw)


def test_indicator_formulas():
    rows = compute_indicators([rec("a", "m1", 110.0, 90.0), rec("a", "m2", 100.0, 95.0),
                               rec("b", "m1", 50.0, 50.0), rec("b", "m2", 50.0, 40.0)])
    m1, m2 = rows["m1"], rows["m2"]
    assert m1.gap_UB == pytest.approx((10 / 110 + 0) / 2)
    assert m2.gap_UB == 0.0
    assert m1.gap_LB == pytest.approx((5 / 95 + 0) / 2)
    assert m2.gap_LB == pytest.approx((0 + 10 / 50) / 2)
    assert (m1.nb_UB_best, m2.nb_UB_best) == (1, 2)  # the tie on b counts for both
    assert (m1.nb_LB_best, m2.nb_LB_best) == (1, 1)
    with pytest.raises(ValueError):
        compute_indicators([])


def test_record_gap():
    r = rec("a", "direct", 200.0, 150.0)
    assert r.gap == 0.25 and r.subproblems_infeasible == 0
    assert relative_gap(0.0, 0.0) == 0.0


def test_root_study_exact_singletons_have_no_gap():
    inst = generate_exact_aggregatable(small_params(1), 3)
    rows = root_study(inst, [1, len(inst.products)], repeats=1)
    assert rows[-1].lb_root_gap == pytest.approx(0.0, abs=1e-9)
    assert rows[0].lb_root_gap >= rows[-1].lb_root_gap - 1e-9
    assert all(r.root_time_ratio > 0 for r in rows)
    with pytest.raises(ValueError):
        root_study(inst, [0])


def infeasible_toy():
    base = toy()
    # nothing can arrive in the first period
    return Instance(base.nodes, base.arcs, base.catalog, (Demand("c", 1, "p", 5.0),), 1, 2, 10.0, "late")


@pytest.fixture
def toy_config(tmp_path):
    paths = []
    for d in (5.0, 15.0, 7.0):
        path = tmp_path / f"toy{d:g}.json"
        save_instance(toy(d), path)
        paths.append({"path": path.name})
    cfg = {"instances": paths, "methods": ["direct", "meta_pbd"], "time_limit": 30, "output": "out"}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_runs_all_cells(toy_config):
    records = run_experiment(toy_config)
    assert len(records) == 6 and all(r.status == "ok" for r in records)
    by = {}
    for r in records:
        by.setdefault(r.instance, []).append(r.UB)
    for ubs in by.values():
        assert max(ubs) <= min(ubs) * 1.01
    out = toy_config.parent / "out"
    for name in ("records.csv", "records.json", "summary.csv", "summary.json"):
        assert (out / name).exists()
    assert list((out / "cells").glob("*.log"))


def test_experiment_resumes(toy_config, monkeypatch):
    run_experiment(toy_config)
    cells = toy_config.parent / "out" / "cells"
    victim = sorted(cells.glob("*.json"))[0]
    victim.unlink()
    calls = []
    real = bench.run_method

    def counting(inst, method, *args, **kw):
        calls.append((inst.name, method))
        return real(inst, method, *args, **kw)

    monkeypatch.setattr(bench, "run_method", counting)
    records = run_experiment(toy_config)
    assert len(calls) == 1 and len(records) == 6
    assert victim.exists()


def test_reports_agree_across_formats(toy_config):
    run_experiment(toy_config)
    out = toy_config.parent / "out"
    from_json = [RunRecord.from_dict(d) for d in json.loads((out / "records.json").read_text())]
    assert read_records_csv(out / "records.csv") == from_json
    for row in json.loads((out / "summary.json").read_text()):
        assert row["subproblems_feasible"] + row["subproblems_infeasible"] == row["subproblems"]
        rs = [r for r in from_json if r.method == row["method"]]
        assert row["subproblems"] == sum(r.subproblems for r in rs)


def test_failed_cells_are_recorded(tmp_path):
    save_instance(infeasible_toy(), tmp_path / "late.json")
    save_instance(toy(), tmp_path / "ok.json")
    cfg = ExperimentConfig.from_dict({"instances": [{"path": "late.json"}, {"path": "ok.json"}],
                                      "methods": ["direct"], "output": "o"}, tmp_path)
    records = run_experiment(cfg)
    status = {r.instance: r.status for r in records}
    assert status == {"late": "infeasible", "toy-5": "ok"}


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValueError, match="parse error"):
        ExperimentConfig.load(bad)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"instances": [], "methods": ["cplex"]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"methods": ["direct"]})


def test_random_method_uses_family_count_subsets():
    inst = generate(small_params(6))
    n_fam = len(inst.catalog.families)
    record, y, x = run_method(inst, "random", 30.0, seed=3)
    assert record.K_trajectory == [n_fam]
    again, _, _ = run_method(inst, "random", 30.0, seed=3)
    assert again.K_trajectory == record.K_trajectory


@pytest.mark.parametrize("i", [0, 1, 2])
def test_direct_meets_configured_gap(i):
    record, _, _ = run_method(generate(small_params(i)), "direct", 60.0, gap=0.01)
    assert record.gap <= 0.01


@pytest.mark.parametrize("method", ["single", "families", "phase1_only", "phase2_only"])
def test_static_and_partial_methods(method):
    inst = generate(small_params(2))
    record, y, x = run_method(inst, method, 30.0)
    assert record.status == "ok" and record.LB <= record.UB + 1e-6
    assert record.subproblems >= record.subproblems_feasible >= 0


# --- command line -----------------------------------------------------------------

def test_cli_round_trip(tmp_path, capsys):
    inst_path = tmp_path / "g.json"
    assert main(["generate", "-o", str(inst_path), "--n-nodes", "8", "--n-products", "4", "--seed", "5"]) == 0
    out = tmp_path / "res" / "g.json"
    assert main(["solve", str(inst_path), "--time-limit", "30", "-o", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["method"] == "meta_pbd" and payload["solution"]["vehicles"]
    assert out.with_suffix(".log").exists()
    assert main(["root-study", str(inst_path), "--K", "1,2", "--repeats", "1"]) == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instances": [{"path": "g.json"}], "methods": ["direct", "single"],
                               "time_limit": 20, "output": "bench"}))
    assert main(["bench", str(cfg)]) == 0
    assert main(["report", str(tmp_path / "bench")]) == 0
    assert "direct" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    assert main(["solve", str(tmp_path / "missing.json")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1
    save_instance(infeasible_toy(), tmp_path / "late.json")
    assert main(["solve", str(tmp_path / "late.json")]) == 3
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instances": [{"path": "late.json"}], "methods": ["direct"], "output": "b"}))
    assert main(["bench", str(cfg)]) == 2
    assert main(["report", str(tmp_path / "nothing")]) == 1


def test_cli_backend_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LSNDP_BACKEND", "scipy")
    save_instance(toy(), tmp_path / "t.json")
    assert main(["solve", str(tmp_path / "t.json"), "--method", "single"]) == 0
    monkeypatch.setenv("LSNDP_BACKEND", "bogus")
    assert main(["solve", str(tmp_path / "t.json")]) == 1
