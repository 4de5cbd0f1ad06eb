"""Experiment harness: per-method runs, batch indicators, root-relaxation study and reports."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .backend import DEFAULT_REL_GAP, INF, INFEASIBLE, Backend, get_backend
from .generator import GeneratorParams, generate
from .instance import Instance, load_instance
from .metapbd import (BendersState, FinalResult, InfeasibleInstance, MetaParams, heuristic_seed, meta_pbd,
                      static_pbd, write_run_log)
from .models import build_lsndp, build_master, extract_flows, extract_vehicles, verify_lsndp_solution
from .partition import ProductPartition, build_partition_sequence, family_partition, random_partition
from .timegraph import expand

log = logging.getLogger(__name__)

METHODS = ("direct", "single", "families", "random", "meta_pbd", "phase1_only", "phase2_only")


def relative_gap(ub: float, lb: float) -> float:
    if not math.isfinite(ub):
        return INF
    if ub > 0:
        return max(0.0, (ub - lb) / ub)
    return 0.0 if lb >= ub - 1e-9 else INF


@dataclass
class RunRecord:
    instance: str
    method: str
    UB: float
    LB: float
    gap: float
    wall_time: float
    K_trajectory: list[int] = field(default_factory=list)
    cuts: int = 0
    master_solutions: int = 0
    subproblems: int = 0
    subproblems_feasible: int = 0
    status: str = "ok"
    error: str = ""

    @property
    def subproblems_infeasible(self) -> int:
        return self.subproblems - self.subproblems_feasible

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        data = {k: data[k] for k in (f.name for f in fields(cls)) if k in data}
        data["K_trajectory"] = [int(k) for k in data.get("K_trajectory", [])]
        return cls(**data)


CSV_FIELDS = [f.name for f in fields(RunRecord)]


@dataclass
class IndicatorRow:
    method: str
    n: int
    gap_UB: float
    gap_LB: float
    nb_UB_best: int
    nb_LB_best: int
    mean_gap: float
    lb_root_gap: float | None = None
    root_time_ratio: float | None = None


def compute_indicators(records: Sequence[RunRecord], tol: float = 1e-9) -> dict[str, IndicatorRow]:
    """Mean gap_UB / gap_LB per method against the best bounds over all methods on each instance.

    Ties count as best for every tied method.
    """
    records = [r for r in records if r.status == "ok"]
    if not records:
        raise ValueError("empty batch")
    by_inst: dict[str, list[RunRecord]] = {}
    for r in records:
        by_inst.setdefault(r.instance, []).append(r)
    acc: dict[str, dict[str, list]] = {}
    for inst, rs in by_inst.items():
        ub_best = min(r.UB for r in rs)
        lb_best = max(r.LB for r in rs)
        for r in rs:
            a = acc.setdefault(r.method, {"gub": [], "glb": [], "ub": 0, "lb": 0, "gap": []})
            a["gub"].append((r.UB - ub_best) / r.UB if r.UB > 0 else 0.0)
            a["glb"].append((lb_best - r.LB) / lb_best if lb_best > 0 else 0.0)
            a["ub"] += r.UB <= ub_best + tol * max(1.0, abs(ub_best))
            a["lb"] += r.LB >= lb_best - tol * max(1.0, abs(lb_best))
            a["gap"].append(r.gap)
    return {m: IndicatorRow(m, len(a["gub"]), float(np.mean(a["gub"])), float(np.mean(a["glb"])),
                            int(a["ub"]), int(a["lb"]), float(np.mean(a["gap"])))
            for m, a in sorted(acc.items())}


@dataclass
class RootRow:
    K: int
    lb_root_gap: float
    root_time_ratio: float
    lp_kemp: float
    lp_lsndp: float
    time_kemp: float
    time_lsndp: float


def _timed_lp(model, backend: Backend, repeats: int):
    best, res = INF, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = backend.solve_lp(model)
        best = min(best, time.perf_counter() - t0)
    return res, best


def root_study(inst: Instance, K_range: Iterable[int], backend: Backend | None = None,
               repeats: int = 3, graph=None) -> list[RootRow]:
    """LP bound and LP solve time of each K-EMP relative to the full model's LP relaxation.

    Timings are the minimum over ``repeats`` solves.
    """
    backend = backend or get_backend()
    graph = graph or expand(inst)
    K_range = sorted(set(K_range))
    if not K_range or K_range[0] < 1 or K_range[-1] > len(inst.products):
        raise ValueError(f"K range must lie in [1, {len(inst.products)}]")
    full, t_full = _timed_lp(build_lsndp(graph, inst, integer=False), backend, repeats)
    if full.status != "optimal":
        raise InfeasibleInstance(f"LP relaxation is {full.status}")
    seq = build_partition_sequence(inst.catalog, K_range[-1])
    rows = []
    for K in K_range:
        res, t = _timed_lp(build_master(graph, inst, seq[K], integer=False), backend, repeats)
        r_full, r_k = full.objective, res.objective
        gap = (r_full - r_k) / r_full if r_full > 0 else 0.0
        rows.append(RootRow(K, gap, t / t_full, r_k, r_full, t, t_full))
    return rows


# --- single runs ------------------------------------------------------------------

def _lsndp_start(model, y: dict, x: dict) -> np.ndarray:
    vec = np.zeros(model.num_vars)
    for a, v in y.items():
        vec[model.var(("y", a))] = v
    for (a, p), v in x.items():
        vec[model.var(("x", a, p))] = v
    return vec


def solve_direct(inst: Instance, time_limit: float, gap: float = DEFAULT_REL_GAP,
                 backend: Backend | None = None, graph=None) -> tuple[RunRecord, dict, dict]:
    backend = backend or get_backend()
    graph = graph or expand(inst)
    t0 = time.perf_counter()
    y_h, x_h, ub_h = heuristic_seed(inst, graph, backend)
    model = build_lsndp(graph, inst)
    res = backend.solve_milp(model, time_limit=max(time_limit - (time.perf_counter() - t0), 1e-3),
                             rel_gap=gap, initial=_lsndp_start(model, y_h, x_h))
    if res.status == INFEASIBLE:
        raise InfeasibleInstance("MILP is infeasible")
    y, x, ub = y_h, x_h, ub_h
    if res.has_solution and res.objective < ub:
        y, x, ub = extract_vehicles(res, graph), extract_flows(res), res.objective
    lb = min(res.best_bound, ub) if math.isfinite(res.best_bound) else 0.0
    if verify_lsndp_solution(graph, inst, y, x):
        raise RuntimeError("direct solution failed verification")
    rec = RunRecord(inst.name, "direct", ub, lb, relative_gap(ub, lb), time.perf_counter() - t0,
                    master_solutions=1)
    return rec, y, x


def _record(inst: Instance, method: str, result: FinalResult, wall: float) -> RunRecord:
    st: BendersState = result.state
    return RunRecord(inst.name, method, result.UB, result.LB, relative_gap(result.UB, result.LB), wall,
                     list(result.K_trajectory), len(st.cut_pool), st.master_solutions, st.subproblems,
                     st.subproblems_feasible)


def run_method(inst: Instance, method: str, time_limit: float, gap: float = DEFAULT_REL_GAP, seed: int = 0,
               K_max: int = 10, backend: Backend | None = None, log_path=None) -> tuple[RunRecord, dict, dict]:
    """Run one method on one instance; returns the record and the best (y, x)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    backend = backend or get_backend()
    graph = expand(inst)
    if method == "direct":
        return solve_direct(inst, time_limit, gap, backend, graph)
    t0 = time.perf_counter()
    n_fam = len([f for f in inst.catalog.families if f])
    if method in ("single", "families", "random"):
        if method == "single":
            part = ProductPartition.whole(inst.products)
        elif method == "families":
            part = family_partition(inst.catalog)
        else:
            part = random_partition(inst.products, n_fam, np.random.default_rng(seed))
        result = static_pbd(inst, part, time_limit, gap, backend, graph=graph)
    else:
        K_max = min(K_max, len(inst.products))
        params = MetaParams.from_time_limit(time_limit, K_max=K_max, gap=gap, seed=seed)
        if method == "phase2_only":
            params = MetaParams(K_max=K_max, gap=gap, seed=seed, t_bounds=params.t_bounds,
                                t1_max=params.t1_max, t2_max=time_limit)
        result = meta_pbd(inst, params, backend, graph=graph, run_phase1=method != "phase2_only",
                          run_phase2=method != "phase1_only")
    rec = _record(inst, method, result, time.perf_counter() - t0)
    if log_path is not None:
        write_run_log(result.history, log_path)
    return rec, result.y, result.x


# --- experiments ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    instances: list[dict]
    methods: list[str]
    time_limit: float = 60.0
    gap: float = DEFAULT_REL_GAP
    seed: int = 0
    K_max: int = 10
    output: str = "results"
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(data, dict) or "instances" not in data or "methods" not in data:
            raise ValueError("config needs 'instances' and 'methods'")
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        bad = [m for m in data["methods"] if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        cfg = cls(**data)
        if base is not None:
            cfg.instances = [dict(s, path=str(base / s["path"])) if "path" in s and not Path(s["path"]).is_absolute()
                             else s for s in cfg.instances]
            if not Path(cfg.output).is_absolute():
                cfg.output = str(base / cfg.output)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"config parse error: {exc}") from exc
        return cls.from_dict(data, path.parent)


def _materialise(spec: dict) -> Instance:
    if "path" in spec:
        return load_instance(spec["path"])
    if "generator" in spec:
        return generate(GeneratorParams.from_dict(spec["generator"]))
    raise ValueError(f"instance spec needs 'path' or 'generator': {spec}")


def _cell_name(instance: str, method: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in instance)
    return f"{safe}__{method}"


def run_experiment(config, workers: int | None = None, backend_name: str | None = None) -> list[RunRecord]:
    """Run every (instance, method) cell not already on disk, then write the reports.

    Cell results live in ``<output>/cells/<instance>__<method>.json`` so an
    interrupted batch resumes where it stopped. Failures are recorded in the
    cell, not raised.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.load(config)
    out = Path(cfg.output)
    cells = out / "cells"
    cells.mkdir(parents=True, exist_ok=True)
    instances = [_materialise(s) for s in cfg.instances]
    todo = []
    for inst in instances:
        for m in cfg.methods:
            path = cells / (_cell_name(inst.name, m) + ".json")
            if not path.exists():
                todo.append((inst, m, path))

    def run_cell(job):
        inst, m, path = job
        backend = get_backend(backend_name)
        try:
            rec, _, _ = run_method(inst, m, cfg.time_limit, cfg.gap, cfg.seed, cfg.K_max, backend,
                                   log_path=path.with_suffix(".log"))
        except Exception as exc:  # a failed cell must not stop the batch
            log.exception("cell %s/%s failed", inst.name, m)
            status = "infeasible" if isinstance(exc, InfeasibleInstance) else "error"
            rec = RunRecord(inst.name, m, INF, 0.0, INF, 0.0, status=status, error=str(exc))
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(rec.to_dict(), indent=1))
        tmp.replace(path)
        return rec

    n = workers or cfg.workers
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            list(pool.map(run_cell, todo))
    else:
        for job in todo:
            run_cell(job)
    names = {inst.name for inst in instances}
    records = [r for r in load_records(cells) if r.instance in names and r.method in cfg.methods]
    write_reports(records, out)
    return records


def load_records(directory) -> list[RunRecord]:
    directory = Path(directory)
    if (directory / "cells").is_dir():
        directory = directory / "cells"
    recs = [RunRecord.from_dict(json.loads(p.read_text())) for p in sorted(directory.glob("*.json"))]
    return sorted(recs, key=lambda r: (r.instance, METHODS.index(r.method) if r.method in METHODS else 99))


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(str(k) for k in v)
    return v


def write_reports(records: Sequence[RunRecord], out) -> None:
    """``records.csv`` / ``records.json`` (same numbers, floats at full precision) and ``summary.json`` / ``summary.csv``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.json").write_text(json.dumps([r.to_dict() for r in records], indent=1))
    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            d = r.to_dict()
            w.writerow([_csv_value(d[k]) for k in CSV_FIELDS])
    ok = [r for r in records if r.status == "ok"]
    summary = []
    if ok:
        ind = compute_indicators(ok)
        for m, row in ind.items():
            rs = [r for r in ok if r.method == m]
            gen = sum(r.subproblems for r in rs)
            feas = sum(r.subproblems_feasible for r in rs)
            d = asdict(row)
            d.update(subproblems=gen, subproblems_feasible=feas, subproblems_infeasible=gen - feas,
                     feasible_pct=100.0 * feas / gen if gen else None,
                     mean_wall_time=float(np.mean([r.wall_time for r in rs])))
            summary.append(d)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    if summary:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(summary[0]))
            w.writeheader()
            for d in summary:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in d.items()})


def read_records_csv(path) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d = dict(row)
            for k in ("UB", "LB", "gap", "wall_time"):
                d[k] = float(d[k])
            for k in ("cuts", "master_solutions", "subproblems", "subproblems_feasible"):
                d[k] = int(d[k])
            d["K_trajectory"] = [int(v) for v in d["K_trajectory"].split()]
            out.append(RunRecord.from_dict(d))
    return out
