"""LP/MILP backend abstraction.

Models are plain containers (:class:`LinearModel`); a backend turns one into a
:class:`SolveResult`. Two adapters ship:

* ``highs``: in-process HiGHS through ``highspy``. Returns Farkas rays, accepts
  MILP warm starts and an objective cutoff.
* ``scipy``: HiGHS through ``scipy.optimize``. No rays, no warm starts; the
  phase-one fallback supplies infeasibility certificates.

Sign convention (minimisation), shared by duals and rays:

* ``>=`` rows carry values ``>= 0``; ``<=`` rows carry values ``<= 0``;
  ``=`` rows are free.
* A dual ``pi`` is feasible when ``c_j - (A^T pi)_j >= 0`` for every variable
  sitting at a zero lower bound.
* A ray ``rho`` certifies infeasibility when ``(A^T rho)_j <= 0`` for every
  variable with bounds ``[0, inf)`` and ``b^T rho > 0``.

Select the default adapter with the ``LSNDP_BACKEND`` environment variable.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

FEAS_TOL = 1e-6
INT_TOL = 1e-5
DEFAULT_REL_GAP = 0.01

INF = math.inf

OPTIMAL = "optimal"
FEASIBLE_AT_LIMIT = "feasible-at-limit"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT_NO_SOLUTION = "limit-no-solution"

_SENSES = ("<=", ">=", "=")


class BackendError(RuntimeError):
    """The solver library failed; distinct from an infeasible model."""


class LinearModel:
    """Minimisation model with hashable variable and constraint ids."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_ids: list[Hashable] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.integer: list[bool] = []
        self._var_pos: dict[Hashable, int] = {}

        self.row_ids: list[Hashable] = []
        self.row_idx: list[np.ndarray] = []
        self.row_val: list[np.ndarray] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self._row_pos: dict[Hashable, int] = {}

    @property
    def num_vars(self) -> int:
        return len(self.var_ids)

    @property
    def num_rows(self) -> int:
        return len(self.row_ids)

    @property
    def is_mip(self) -> bool:
        return any(self.integer)

    def add_var(self, vid: Hashable, lb: float = 0.0, ub: float = INF,
                obj: float = 0.0, integer: bool = False) -> int:
        if vid in self._var_pos:
            raise ValueError(f"duplicate variable {vid!r}")
        if lb > ub:
            raise ValueError(f"variable {vid!r}: lower bound {lb} > upper bound {ub}")
        pos = len(self.var_ids)
        self._var_pos[vid] = pos
        self.var_ids.append(vid)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        return pos

    def add_constr(self, rid: Hashable, terms: Mapping[int, float] | Iterable[tuple[int, float]],
                   sense: str, rhs: float) -> int:
        """Add ``sum(coef * var[pos]) <sense> rhs``; ``terms`` maps positions to coefficients."""
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if rid in self._row_pos:
            raise ValueError(f"duplicate constraint {rid!r}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[int, float] = {}
        for pos, coef in items:
            if not 0 <= pos < len(self.var_ids):
                raise ValueError(f"constraint {rid!r} references undeclared variable {pos}")
            merged[pos] = merged.get(pos, 0.0) + float(coef)
        idx = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        val = np.fromiter(merged.values(), dtype=float, count=len(merged))
        pos = len(self.row_ids)
        self._row_pos[rid] = pos
        self.row_ids.append(rid)
        self.row_idx.append(idx)
        self.row_val.append(val)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        return pos

    def var(self, vid: Hashable) -> int:
        return self._var_pos[vid]

    def has_var(self, vid: Hashable) -> bool:
        return vid in self._var_pos

    def row(self, rid: Hashable) -> int:
        return self._row_pos[rid]

    def has_row(self, rid: Hashable) -> bool:
        return rid in self._row_pos

    def set_obj(self, vid: Hashable, coef: float) -> None:
        self.obj[self._var_pos[vid]] = float(coef)

    def copy(self) -> "LinearModel":
        other = LinearModel(self.name)
        other.var_ids = list(self.var_ids)
        other.lb, other.ub = list(self.lb), list(self.ub)
        other.obj, other.integer = list(self.obj), list(self.integer)
        other._var_pos = dict(self._var_pos)
        other.row_ids = list(self.row_ids)
        other.row_idx, other.row_val = list(self.row_idx), list(self.row_val)
        other.sense, other.rhs = list(self.sense), list(self.rhs)
        other._row_pos = dict(self._row_pos)
        return other

    def relaxed(self) -> "LinearModel":
        """Copy with integrality dropped."""
        other = self.copy()
        other.integer = [False] * other.num_vars
        other.name = f"{self.name}-lp"
        return other

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        start = np.zeros(self.num_rows + 1, dtype=np.int64)
        if self.num_rows:
            start[1:] = np.cumsum([len(i) for i in self.row_idx])
            index = np.concatenate(self.row_idx) if start[-1] else np.zeros(0, dtype=np.int64)
            value = np.concatenate(self.row_val) if start[-1] else np.zeros(0)
        else:
            index, value = np.zeros(0, dtype=np.int64), np.zeros(0)
        return start, index, value

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.rhs, dtype=float)
        sense = np.asarray(self.sense)
        lower = np.where(sense == "<=", -INF, rhs)
        upper = np.where(sense == ">=", INF, rhs)
        return lower, upper

    def activity(self, x: np.ndarray) -> np.ndarray:
        return np.array([float(v @ x[i]) for i, v in zip(self.row_idx, self.row_val)])

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.obj, x))

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound, row or integrality violation of a point."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        worst = max(worst, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        act = self.activity(x)
        for a, s, r in zip(act, self.sense, self.rhs):
            if s == "<=":
                worst = max(worst, a - r)
            elif s == ">=":
                worst = max(worst, r - a)
            else:
                worst = max(worst, abs(a - r))
        ints = np.asarray(self.integer, dtype=bool)
        if ints.any():
            worst = max(worst, float(np.max(np.abs(x[ints] - np.round(x[ints])))))
        return worst


@dataclass
class SolveResult:
    status: str
    model: LinearModel
    x: np.ndarray | None = None
    row_duals: np.ndarray | None = None
    ray_values: np.ndarray | None = None
    objective: float = math.nan
    best_bound: float = math.nan
    solve_time: float = 0.0
    ray_source: str | None = None
    info: dict = field(default_factory=dict)

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    @property
    def primal(self) -> dict[Hashable, float]:
        if self.x is None:
            return {}
        return dict(zip(self.model.var_ids, self.x.tolist()))

    @property
    def duals(self) -> dict[Hashable, float]:
        if self.row_duals is None:
            return {}
        return dict(zip(self.model.row_ids, self.row_duals.tolist()))

    @property
    def infeasibility_ray(self) -> dict[Hashable, float]:
        if self.ray_values is None:
            return {}
        return dict(zip(self.model.row_ids, self.ray_values.tolist()))

    def value(self, vid: Hashable) -> float:
        return float(self.x[self.model.var(vid)])

    def dual(self, rid: Hashable) -> float:
        return float(self.row_duals[self.model.row(rid)])

    @property
    def mip_gap(self) -> float:
        if not (math.isfinite(self.objective) and math.isfinite(self.best_bound)):
            return INF
        if abs(self.objective) < 1e-12:
            return 0.0 if abs(self.best_bound) < 1e-9 else INF
        return max(0.0, (self.objective - self.best_bound) / abs(self.objective))


def check_ray(model: LinearModel, ray: np.ndarray, tol: float = FEAS_TOL) -> bool:
    """True when ``ray`` proves ``model`` infeasible under the module's sign convention."""
    ray = np.asarray(ray, dtype=float)
    for s, v in zip(model.sense, ray):
        if (s == ">=" and v < -tol) or (s == "<=" and v > tol):
            return False
    if not np.any(np.abs(ray) > tol):
        return False
    lb, ub = np.asarray(model.lb), np.asarray(model.ub)
    atr = np.zeros(model.num_vars)
    for r, (idx, val) in enumerate(zip(model.row_idx, model.row_val)):
        if ray[r]:
            np.add.at(atr, idx, ray[r] * val)
    # rho^T b plus what the variable bounds can contribute must stay positive
    btr = float(np.dot(model.rhs, ray))
    for j in range(model.num_vars):
        a = atr[j]
        if a > tol:
            if ub[j] == INF:
                return False
            btr -= a * ub[j]
        elif a < -tol:
            if lb[j] == -INF:
                return False
            btr -= a * lb[j]
    return btr > tol


def reduced_costs(model: LinearModel, duals: np.ndarray) -> np.ndarray:
    atp = np.zeros(model.num_vars)
    for r, (idx, val) in enumerate(zip(model.row_idx, model.row_val)):
        if duals[r]:
            np.add.at(atp, idx, duals[r] * val)
    return np.asarray(model.obj) - atp


def phase_one_ray(model: LinearModel, backend: "Backend", time_limit: float = INF) -> np.ndarray | None:
    """Certificate of infeasibility from the elastic (phase-one) LP.

    Every row gets slack that absorbs violation at unit cost and the original
    objective is zeroed. A positive optimum means the model is infeasible, and
    the optimal duals of the elastic rows form a valid ray.
    """
    elastic = LinearModel(f"{model.name}-phase1")
    for vid, lb, ub in zip(model.var_ids, model.lb, model.ub):
        elastic.add_var(vid, lb, ub, 0.0)
    for r, rid in enumerate(model.row_ids):
        terms = list(zip(model.row_idx[r].tolist(), model.row_val[r].tolist()))
        s = model.sense[r]
        if s in (">=", "="):
            terms.append((elastic.add_var(("__slack+", r), obj=1.0), 1.0))
        if s in ("<=", "="):
            terms.append((elastic.add_var(("__slack-", r), obj=1.0), -1.0))
        elastic.add_constr(rid, terms, s, model.rhs[r])
    res = backend.solve_lp(elastic, time_limit=time_limit)
    if res.status != OPTIMAL or res.objective <= FEAS_TOL:
        return None
    return np.asarray(res.row_duals, dtype=float)


class Backend:
    """Adapter contract. Subclasses implement ``_solve``."""

    name = "abstract"
    supports_rays = False
    supports_warm_start = False

    def solve_lp(self, model: LinearModel, time_limit: float = INF) -> SolveResult:
        if model.is_mip:
            raise ValueError("solve_lp called on a model with integer variables")
        res = self._solve(model, time_limit=time_limit, rel_gap=0.0)
        if res.status == INFEASIBLE:
            ray = res.ray_values
            if ray is not None and not check_ray(model, ray):
                ray = -ray if check_ray(model, -ray) else None
            if ray is None:
                ray = phase_one_ray(model, self, time_limit)
                res.ray_source = "phase-one" if ray is not None else None
            else:
                res.ray_source = "farkas"
            res.ray_values = ray
        return res

    def solve_milp(self, model: LinearModel, time_limit: float = INF,
                   rel_gap: float = DEFAULT_REL_GAP,
                   initial: Mapping[Hashable, float] | np.ndarray | None = None,
                   cutoff: float | None = None) -> SolveResult:
        if initial is not None and not isinstance(initial, np.ndarray):
            start = np.zeros(model.num_vars)
            for vid, v in initial.items():
                start[model.var(vid)] = v
            initial = start
        return self._solve(model, time_limit=time_limit, rel_gap=rel_gap,
                           initial=initial, cutoff=cutoff)

    def _solve(self, model, time_limit, rel_gap, initial=None, cutoff=None) -> SolveResult:
        raise NotImplementedError


class HighsBackend(Backend):
    name = "highs"
    supports_rays = True
    supports_warm_start = True

    def __init__(self, threads: int = 1, seed: int = 0):
        import highspy  # noqa: F401  (fail early when missing)
        self.threads = threads
        self.seed = seed

    def _highs(self, time_limit: float):
        import highspy
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", self.threads)
        h.setOptionValue("random_seed", self.seed)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        h.setOptionValue("mip_feasibility_tolerance", 1e-9)
        if math.isfinite(time_limit):
            h.setOptionValue("time_limit", max(float(time_limit), 1e-6))
        return h

    def _pass(self, h, model: LinearModel) -> None:
        import highspy
        lp = highspy.HighsLp()
        n, m = model.num_vars, model.num_rows
        lp.num_col_, lp.num_row_ = n, m
        lp.col_cost_ = np.asarray(model.obj, dtype=float)
        lp.col_lower_ = np.asarray(model.lb, dtype=float)
        lp.col_upper_ = np.asarray(model.ub, dtype=float)
        lower, upper = model.row_bounds()
        lp.row_lower_, lp.row_upper_ = lower, upper
        start, index, value = model.csr()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.num_col_, lp.a_matrix_.num_row_ = n, m
        lp.a_matrix_.start_, lp.a_matrix_.index_, lp.a_matrix_.value_ = start, index, value
        if model.is_mip:
            lp.integrality_ = [highspy.HighsVarType.kInteger if i else highspy.HighsVarType.kContinuous
                               for i in model.integer]
        status = h.passModel(lp)
        if status == highspy.HighsStatus.kError:
            raise BackendError(f"HiGHS rejected model {model.name}")

    def _solve(self, model, time_limit, rel_gap, initial=None, cutoff=None):
        import highspy
        MS = highspy.HighsModelStatus
        h = self._highs(time_limit)
        mip = model.is_mip
        if mip:
            h.setOptionValue("mip_rel_gap", float(rel_gap))
            h.setOptionValue("mip_abs_gap", 1e-9 if rel_gap == 0 else 1e-6)
            if cutoff is not None and math.isfinite(cutoff):
                h.setOptionValue("objective_bound", float(cutoff))
        self._pass(h, model)
        if mip and initial is not None:
            sol = highspy.HighsSolution()
            sol.col_value = list(np.asarray(initial, dtype=float))
            sol.value_valid = True
            h.setSolution(sol)
        t0 = time.perf_counter()
        run = h.run()
        elapsed = time.perf_counter() - t0
        if run == highspy.HighsStatus.kError:
            raise BackendError(f"HiGHS failed on {model.name}")
        ms = h.getModelStatus()
        info = h.getInfo()
        res = SolveResult(status=LIMIT_NO_SOLUTION, model=model, solve_time=elapsed)
        has_primal = info.primal_solution_status == 2
        if ms == MS.kOptimal:
            res.status = OPTIMAL
        elif ms in (MS.kInfeasible,):
            res.status = INFEASIBLE
        elif ms in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
            if not mip and ms == MS.kUnboundedOrInfeasible:
                # rerun without presolve to tell the two apart
                h.setOptionValue("presolve", "off")
                h.run()
                ms = h.getModelStatus()
                res.status = INFEASIBLE if ms == MS.kInfeasible else UNBOUNDED
            else:
                res.status = UNBOUNDED
        elif ms == MS.kObjectiveBound:
            res.status = FEASIBLE_AT_LIMIT if has_primal else INFEASIBLE
            res.info["cutoff"] = True
        elif ms in (MS.kTimeLimit, MS.kIterationLimit, MS.kSolutionLimit, MS.kInterrupt):
            res.status = FEASIBLE_AT_LIMIT if has_primal else LIMIT_NO_SOLUTION
        elif ms == MS.kModelEmpty:
            res.status = OPTIMAL
            has_primal = True
        else:
            raise BackendError(f"HiGHS returned {h.modelStatusToString(ms)} on {model.name}")

        if res.status in (OPTIMAL, FEASIBLE_AT_LIMIT) and (has_primal or model.num_vars == 0):
            sol = h.getSolution()
            res.x = np.asarray(sol.col_value, dtype=float) if model.num_vars else np.zeros(0)
            res.objective = model.objective_value(res.x)
            if mip:
                res.best_bound = float(info.mip_dual_bound)
                if res.status == OPTIMAL and not math.isfinite(res.best_bound):
                    res.best_bound = res.objective
                res.best_bound = min(res.best_bound, res.objective)
            else:
                res.best_bound = res.objective
                if res.status == OPTIMAL:
                    res.row_duals = np.asarray(sol.row_dual, dtype=float) if model.num_rows else np.zeros(0)
        elif mip and res.status in (LIMIT_NO_SOLUTION, INFEASIBLE):
            bound = float(info.mip_dual_bound)
            res.best_bound = bound if math.isfinite(bound) else -INF
        if res.status == INFEASIBLE and not mip:
            ray = self._ray(h)
            if ray is None:
                h.setOptionValue("presolve", "off")
                h.clearSolver()
                h.run()
                if h.getModelStatus() == MS.kInfeasible:
                    ray = self._ray(h)
            res.ray_values = ray
        return res

    @staticmethod
    def _ray(h) -> np.ndarray | None:
        try:
            status, exists, values = h.getDualRay()
        except Exception:  # older bindings
            return None
        if not exists:
            return None
        return np.asarray(values, dtype=float)


class ScipyBackend(Backend):
    """HiGHS through ``scipy.optimize``; exercises the ray fallback."""

    name = "scipy"

    def _solve(self, model, time_limit, rel_gap, initial=None, cutoff=None):
        from scipy.optimize import Bounds, LinearConstraint, linprog, milp
        from scipy.sparse import csr_matrix

        n, m = model.num_vars, model.num_rows
        start, index, value = model.csr()
        A = csr_matrix((value, index, start), shape=(m, n))
        lower, upper = model.row_bounds()
        res = SolveResult(status=LIMIT_NO_SOLUTION, model=model)
        t0 = time.perf_counter()
        opts = {}
        if math.isfinite(time_limit):
            opts["time_limit"] = max(float(time_limit), 1e-6)
        if model.is_mip:
            opts["mip_rel_gap"] = float(rel_gap)
            cons = [LinearConstraint(A, lower, upper)] if m else []
            out = milp(np.asarray(model.obj), constraints=cons,
                       integrality=np.asarray(model.integer, dtype=int),
                       bounds=Bounds(np.asarray(model.lb), np.asarray(model.ub)), options=opts)
            res.solve_time = time.perf_counter() - t0
            if out.status == 0:
                res.status = OPTIMAL
            elif out.status == 1:
                res.status = FEASIBLE_AT_LIMIT if out.x is not None else LIMIT_NO_SOLUTION
            elif out.status == 2:
                res.status = INFEASIBLE
            elif out.status == 3:
                res.status = UNBOUNDED
            else:
                raise BackendError(out.message)
            if out.x is not None:
                res.x = np.asarray(out.x, dtype=float)
                res.objective = model.objective_value(res.x)
                bound = getattr(out, "mip_dual_bound", None)
                res.best_bound = res.objective if bound is None or not math.isfinite(bound) else min(bound, res.objective)
            return res

        sense = np.asarray(model.sense)
        ub_rows = np.flatnonzero(sense != "=")
        eq_rows = np.flatnonzero(sense == "=")
        flip = np.where(sense[ub_rows] == ">=", -1.0, 1.0)
        rhs = np.asarray(model.rhs)
        kwargs = {}
        if len(ub_rows):
            kwargs["A_ub"] = A[ub_rows].multiply(flip[:, None]).tocsr()
            kwargs["b_ub"] = rhs[ub_rows] * flip
        if len(eq_rows):
            kwargs["A_eq"], kwargs["b_eq"] = A[eq_rows], rhs[eq_rows]
        bounds = list(zip([None if v == -INF else v for v in model.lb],
                          [None if v == INF else v for v in model.ub]))
        out = linprog(np.asarray(model.obj), bounds=bounds, method="highs", options=opts, **kwargs)
        res.solve_time = time.perf_counter() - t0
        if out.status == 0:
            res.status = OPTIMAL
            res.x = np.asarray(out.x, dtype=float)
            res.objective = res.best_bound = model.objective_value(res.x)
            duals = np.zeros(m)
            if len(ub_rows):
                duals[ub_rows] = np.asarray(out.ineqlin.marginals) * flip
            if len(eq_rows):
                duals[eq_rows] = np.asarray(out.eqlin.marginals)
            res.row_duals = duals
        elif out.status == 2:
            res.status = INFEASIBLE
        elif out.status == 3:
            res.status = UNBOUNDED
        elif out.status == 1:
            res.status = LIMIT_NO_SOLUTION
        else:
            raise BackendError(out.message)
        return res


_BACKENDS = {"highs": HighsBackend, "scipy": ScipyBackend}


def get_backend(name: str | None = None, **kwargs) -> Backend:
    name = (name or os.environ.get("LSNDP_BACKEND") or "highs").lower()
    try:
        return _BACKENDS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}") from None


def solve_lp(model: LinearModel, time_limit: float = INF, backend: Backend | None = None) -> SolveResult:
    return (backend or get_backend()).solve_lp(model, time_limit=time_limit)


def solve_milp(model: LinearModel, time_limit: float = INF, rel_gap: float = DEFAULT_REL_GAP,
               initial=None, cutoff: float | None = None, backend: Backend | None = None) -> SolveResult:
    return (backend or get_backend()).solve_milp(model, time_limit=time_limit, rel_gap=rel_gap,
                                                 initial=initial, cutoff=cutoff)


def _lp_name(vid: Hashable, prefix: str) -> str:
    parts = vid if isinstance(vid, tuple) else (vid,)
    text = "_".join(str(p) for p in parts)
    safe = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in text)
    return f"{prefix}{safe}"


def write_lp_file(model: LinearModel, path) -> dict[str, Hashable]:
    """Write ``model`` in CPLEX LP text format.

    Layout, in order:

    ``Minimize`` / ``obj: <terms>``
        objective, one signed ``coef name`` term per variable with a
        nonzero coefficient (``0 x0`` when all are zero);
    ``Subject To``
        one line per row, ``<name>: <terms> <= | >= | = <rhs>``;
    ``Bounds``
        ``lb <= name <= ub``, ``name free`` or ``name >= lb`` as needed;
    ``General``
        integer variable names, whitespace separated;
    ``End``.

    Variables are written as ``v<pos>_<id>`` and rows as ``r<pos>_<id>`` with
    non-alphanumeric characters replaced by ``_``. Returns the name map from
    LP-file names back to model ids.
    """
    names = [f"v{j}_{_lp_name(v, '')}" for j, v in enumerate(model.var_ids)]
    rnames = [f"r{i}_{_lp_name(r, '')}" for i, r in enumerate(model.row_ids)]

    def terms(pairs):
        out = [f"{'-' if c < 0 else '+'} {abs(c):.17g} {names[j]}" for j, c in pairs if c != 0]
        return " ".join(out) if out else f"0 {names[0]}" if names else "0"

    lines = ["\\ written by lsndp", "Minimize", " obj: " + terms(enumerate(model.obj)), "Subject To"]
    for i in range(model.num_rows):
        sense = model.sense[i]
        body = terms(zip(model.row_idx[i].tolist(), model.row_val[i].tolist()))
        lines.append(f" {rnames[i]}: {body} {sense} {model.rhs[i]:.17g}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lb, ub = model.lb[j], model.ub[j]
        if lb == -INF and ub == INF:
            lines.append(f" {names[j]} free")
        elif ub == INF:
            lines.append(f" {names[j]} >= {lb:.17g}")
        else:
            low = "-inf" if lb == -INF else f"{lb:.17g}"
            lines.append(f" {low} <= {names[j]} <= {ub:.17g}")
    ints = [names[j] for j in range(model.num_vars) if model.integer[j]]
    if ints:
        lines.append("General")
        lines.extend(f" {n}" for n in ints)
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    mapping = dict(zip(names, model.var_ids))
    mapping.update(zip(rnames, model.row_ids))
    return mapping
