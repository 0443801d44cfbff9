"""Command-line entry points.

Exit codes: 0 success, 1 validation/certification failure, 2 I/O or parse
error (bad files, bad arguments, malformed formats).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import alns, bench, instances, oracle
from .model import solution_cost, validate_solution


def _add_solver_flags(p):
    p.add_argument("--variant", default="A0", choices=alns.VARIANT_IDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=int, help="minimum iteration count")
    p.add_argument("--theta-bar", type=int, dest="theta_bar",
                   help="post-theta patience")


def _overrides(args):
    out = {}
    if args.theta is not None:
        out["theta"] = args.theta
    if getattr(args, "theta_bar", None) is not None:
        out["theta_bar"] = args.theta_bar
    return out


def cmd_solve(args):
    inst = instances.load_instance(args.instance)
    cfg = alns.SearchConfig.for_variant(args.variant, seed=args.seed,
                                        collect_trace=args.trace is not None,
                                        **_overrides(args))
    res = alns.run(inst, cfg)
    report = validate_solution(inst, res.best)
    if not report.ok:
        print(f"internal error: solution failed validation: {report.violations}",
              file=sys.stderr)
        return 1
    cost = solution_cost(inst, res.best)
    print(f"{inst.name}: total {cost.total:.4f} (travel {cost.travel:.4f}, "
          f"penalty {cost.penalty:.4f}), unvisited {len(res.best.bank)}, "
          f"{res.iterations} iterations, {res.restarts} restarts, "
          f"{res.wall_time:.1f}s")
    if args.out:
        instances.save_solution(inst, res.best, args.out)
        print(f"solution written to {args.out}")
    if args.geojson:
        Path(args.geojson).write_text(instances.geojson_text(inst, res.best))
        print(f"geojson written to {args.geojson}")
    if args.trace:
        with open(args.trace, "w") as fh:
            for t in res.trace:
                fh.write(json.dumps(t.__dict__) + "\n")
        print(f"trace written to {args.trace}")
    return 0


def cmd_bench(args):
    spec = bench.ExperimentSpec.from_json(args.experiment)
    if args.jobs:
        spec.jobs = args.jobs
    reference = bench.load_reference(spec.reference)
    records = bench.run_experiment(
        spec, progress=lambda r: print(
            f"  {r.instance} {r.variant} rep {r.replication}: {r.best:.2f} "
            f"({r.wall_time_s:.1f}s)", file=sys.stderr))
    rows = bench.summarize(records, reference)
    bench.write_runs_csv(records, args.csv)
    summary_path = args.summary or str(Path(args.csv).with_suffix("")) + "_summary.csv"
    bench.write_summary_csv(rows, summary_path)
    print(f"{len(records)} runs -> {args.csv}; summary -> {summary_path}")
    for row in bench.class_summary(rows):
        print(f"  {row['class']} {row['variant']}: best_avg {row['best_avg']:.1f} "
              f"opt {row['n_optimal']} imp {row['n_improved']} "
              f"worse {row['n_worse']} new {row['n_new_best']}")
    return 0


def cmd_gen(args):
    inst = instances.generate_covid_style(
        args.patients, args.caregivers, args.seed,
        bbox=tuple(args.bbox), name=args.name)
    instances.save_instance(inst, args.out)
    print(f"{inst.name}: {inst.n} patients, {inst.m} caregivers -> {args.out}")
    return 0


def cmd_validate(args):
    inst = instances.load_instance(args.instance)
    sol = instances.load_solution(inst, args.solution)
    report = validate_solution(inst, sol)
    if report.ok:
        cost = solution_cost(inst, sol)
        print(f"valid; total {cost.total:.4f} (travel {cost.travel:.4f}, "
              f"penalty {cost.penalty:.4f})")
        return 0
    for v in report.violations:
        print(f"{v.code}: {v.detail}")
    return 1


def cmd_oracle(args):
    inst = instances.load_instance(args.instance)
    opt = oracle.brute_force_optimum(inst)
    print(f"{inst.name}: optimum {opt.cost:.6f} "
          f"({opt.feasible_count} feasible / {opt.evaluated_count} evaluated, "
          f"{opt.wall_time:.1f}s)")
    if args.solution:
        sol = instances.load_solution(inst, args.solution)
        cert = oracle.certify(inst, sol, tolerance=args.tolerance)
        print(cert.message)
        return 0 if cert.passed else 1
    if args.out:
        instances.save_solution(inst, opt.solution, args.out)
        print(f"optimal solution written to {args.out}")
    return 0


def cmd_import(args):
    text = Path(args.solomon).read_text()
    sidecar = Path(args.sidecar).read_text()
    inst = instances.import_solomon(text, sidecar, n_patients=args.patients,
                                    filename=args.solomon)
    instances.save_instance(inst, args.out)
    print(f"{inst.name}: {inst.n} patients, {inst.m} caregivers -> {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="hhsrp",
        description="Home-health scheduling and routing with lunch breaks: "
                    "adaptive large neighborhood search solver and benchmark "
                    "harness.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the search on one instance")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.add_argument("--out", help="write the best solution to this file")
    p.add_argument("--geojson", help="write routes as GeoJSON")
    p.add_argument("--trace", help="write per-iteration trace as JSON lines")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run an experiment file")
    p.add_argument("experiment", help="JSON ExperimentSpec")
    p.add_argument("--csv", required=True, help="per-run CSV output")
    p.add_argument("--summary", help="summary CSV (default <csv>_summary.csv)")
    p.add_argument("--jobs", type=int, help="parallel workers")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate a pandemic-style instance")
    p.add_argument("--patients", type=int, required=True)
    p.add_argument("--caregivers", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bbox", type=float, nargs=4, default=[0.0, 0.0, 30.0, 30.0],
                   metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="exact optimum for a tiny instance")
    p.add_argument("instance")
    p.add_argument("--solution", help="certify this solution instead")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out", help="write the optimal solution here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("import", help="convert Solomon format plus sidecar to native")
    p.add_argument("solomon")
    p.add_argument("sidecar")
    p.add_argument("--patients", type=int, help="customer rows to take")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (instances.FormatError, bench.BenchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
