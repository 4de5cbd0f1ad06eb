"""Command line: ``lsndp generate|solve|root-study|bench|report``.

Exit codes: 0 success, 1 usage error, 2 solve failure, 3 infeasible instance.
The solver backend is taken from ``--backend`` or the ``LSNDP_BACKEND``
environment variable (``highs`` by default, or ``scipy``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .backend import BackendError, get_backend
from .bench import (METHODS, ExperimentConfig, compute_indicators, load_records, root_study, run_experiment,
                    run_method, write_reports)
from .generator import GeneratorError, GeneratorParams, generate, generate_exact_aggregatable
from .instance import InstanceError, load_instance, save_instance
from .metapbd import InfeasibleInstance

EXIT_OK, EXIT_USAGE, EXIT_SOLVE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _gen_params(args) -> GeneratorParams:
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    for f in fields(GeneratorParams):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    return GeneratorParams.from_dict(data)


def cmd_generate(args) -> int:
    params = _gen_params(args)
    inst = generate_exact_aggregatable(params, args.exact) if args.exact else generate(params)
    if args.output == "-":
        from .instance import dumps_instance
        sys.stdout.write(dumps_instance(inst))
    else:
        save_instance(inst, args.output)
        print(f"wrote {args.output}: {len(inst.nodes)} nodes, {len(inst.arcs)} arcs, "
              f"{len(inst.products)} products, {len(inst.demands)} demands")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    backend = get_backend(args.backend)
    out = Path(args.output) if args.output else None
    log_path = None
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        log_path = out.with_suffix(".log")
    rec, y, x = run_method(inst, args.method, args.time_limit, args.gap, args.seed, args.K_max, backend,
                           log_path=log_path)
    print(f"{inst.name} {rec.method}: UB={rec.UB:.6f} LB={rec.LB:.6f} gap={100 * rec.gap:.3f}% "
          f"time={rec.wall_time:.2f}s K={rec.K_trajectory}")
    if out:
        payload = rec.to_dict()
        payload["solution"] = {
            "vehicles": [{"arc": a, "count": n} for a, n in sorted(y.items())],
            "flows": [{"arc": a, "product": p, "amount": v} for (a, p), v in sorted(x.items())],
        }
        out.write_text(json.dumps(payload, indent=1))
    return EXIT_OK


def cmd_root_study(args) -> int:
    backend = get_backend(args.backend)
    ks = [int(k) for k in args.K.split(",")]
    rows = []
    for path in args.instances:
        inst = load_instance(path)
        for r in root_study(inst, ks, backend, repeats=args.repeats):
            rows.append(dict(instance=inst.name, **asdict(r)))
    text = json.dumps(rows, indent=1)
    if args.output:
        Path(args.output).write_text(text)
    print("instance\tK\tlb_root_gap\troot_time_ratio")
    for r in rows:
        print(f"{r['instance']}\t{r['K']}\t{r['lb_root_gap']:.6f}\t{r['root_time_ratio']:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output:
        cfg.output = args.output
    records = run_experiment(cfg, workers=args.workers, backend_name=args.backend)
    _print_summary(records)
    print(f"reports in {cfg.output}")
    return EXIT_OK if all(r.status == "ok" for r in records) else EXIT_SOLVE


def cmd_report(args) -> int:
    records = load_records(args.directory)
    if not records:
        raise UsageError(f"no records under {args.directory}")
    write_reports(records, args.directory)
    _print_summary(records)
    return EXIT_OK


def _print_summary(records) -> None:
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        print("no successful runs")
        return
    print("method\tn\tgap_UB\tgap_LB\tnb_UB_best\tnb_LB_best\tmean_gap")
    for m, row in compute_indicators(ok).items():
        print(f"{m}\t{row.n}\t{100 * row.gap_UB:.3f}%\t{100 * row.gap_LB:.3f}%\t{row.nb_UB_best}\t"
              f"{row.nb_LB_best}\t{100 * row.mean_gap:.3f}%")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lsndp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("-o", "--output", required=True, help="instance file, or - for stdout")
    g.add_argument("--config", help="JSON file with generator parameters (flags override it)")
    g.add_argument("--exact", type=int, metavar="K", help="all-or-nothing offers over K families")
    for name, typ in (("n_nodes", int), ("radius", float), ("days", int), ("periods_per_day", int),
                      ("n_families", int), ("n_products", int), ("phi", float), ("seed", int),
                      ("demand_density", float), ("vehicle_capacity", float), ("name", str)):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one instance with one method")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="meta_pbd")
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--gap", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--K-max", dest="K_max", type=int, default=10)
    s.add_argument("-o", "--output", help="result JSON; the event log goes next to it with a .log suffix")
    s.add_argument("--backend")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("root-study", help="LP bound and time of K-EMP relaxations")
    r.add_argument("instances", nargs="+")
    r.add_argument("--K", default="1,2,4,7", help="comma-separated K values")
    r.add_argument("--repeats", type=int, default=3)
    r.add_argument("-o", "--output")
    r.add_argument("--backend")
    r.set_defaults(func=cmd_root_study)

    b = sub.add_parser("bench", help="run an experiment config (resumable)")
    b.add_argument("config")
    b.add_argument("-o", "--output", help="override the config's output directory")
    b.add_argument("--workers", type=int)
    b.add_argument("--backend")
    b.set_defaults(func=cmd_bench)

    rp = sub.add_parser("report", help="rebuild reports from finished cells")
    rp.add_argument("directory")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleInstance as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, InstanceError, GeneratorError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendError, RuntimeError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
