"""``acfw`` command line: run, sweep, gradcheck, audit."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..atoms import random_feasible_point
from ..problems import gradient_error
from ..verify import ANALYTIC, RateCertificate, audit_trace
from .config import (SPAN_PROBLEMS, PROBLEMS, ConfigError, ExperimentConfig, build_config,
                     expand_grid, format_config, load_config, parse_pairs)
from .io import atomic_write, emit_csv, format_csv, plot_series, read_csv
from .runner import build_instance, run_experiment


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def write_run(out_dir, cfg, trace, summary):
    os.makedirs(out_dir, exist_ok=True)
    emit_csv(trace, os.path.join(out_dir, "trace.csv"))
    atomic_write(os.path.join(out_dir, "summary.json"), _json(summary))
    atomic_write(os.path.join(out_dir, "config.txt"), format_config(cfg))


def _print_summary(summary, stream=None):
    stream = stream or sys.stdout
    print(f"{summary['label']} on {summary['problem']} (seed {summary['seed']}): "
          f"{summary['status']} after {summary['iterations']} iterations", file=stream)
    print(f"  f = {summary['final_f']:.12g}  gap = {summary['final_gap']:.3e}  "
          f"evals f/g/lmo = {summary['n_f']}/{summary['n_g']}/{summary['n_lmo']}  "
          f"time = {summary['elapsed_s']:.3f}s", file=stream)
    for line in summary["audit"]:
        print("  " + line, file=stream)


def cmd_run(args):
    cfg = load_config(args.config, args.set)
    trace, summary = run_experiment(cfg)
    if args.out:
        write_run(args.out, cfg, trace, summary)
    if args.stdout_csv:
        sys.stdout.write(format_csv(trace))
    else:
        _print_summary(summary)
    return 0 if summary["success"] else 1


def _sweep_one(job):
    idx, raw, out = job
    cfg = build_config(raw)
    trace, summary = run_experiment(cfg)
    name = f"{idx:04d}-{summary['label']}-{cfg.problem}-s{cfg.seed}"
    write_run(os.path.join(out, name), cfg, trace, summary)
    summary["run"] = name
    return summary, trace.label, plot_series(trace)


def cmd_sweep(args):
    with open(args.grid) as fh:
        raw = parse_pairs(fh, args.grid)
    combos = expand_grid(raw)
    for combo in combos:
        build_config(combo)  # fail fast before anything runs
    jobs = [(i, c, args.out) for i, c in enumerate(combos)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    plots = {}
    for summary, label, series in results:
        plots.setdefault(label, []).append(series)
        print(f"{summary['run']}: {summary['status']}, gap {summary['final_gap']:.3e}, "
              f"audit {'ok' if summary['success'] else 'FAILED'}")
    atomic_write(os.path.join(args.out, "plot.json"), json.dumps(plots) + "\n")
    atomic_write(os.path.join(args.out, "sweep.json"), _json([r[0] for r in results]))
    return 0 if all(r[0]["success"] for r in results) else 1


def cmd_gradcheck(args):
    sub = "MP" if args.problem in SPAN_PROBLEMS else "CFW"
    inst = build_instance(ExperimentConfig(problem=args.problem, subroutine=sub, seed=args.seed))
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for i in range(args.points):
        x = random_feasible_point(inst.dictionary, rng)
        err = gradient_error(inst.objective, x)
        worst = max(worst, err)
        print(f"point {i}: relative error {err:.3e}")
    ok = worst <= args.tol
    print(f"{args.problem}: worst relative error {worst:.3e} ({'ok' if ok else 'FAILED'}, tol {args.tol:g})")
    return 0 if ok else 1


def cmd_audit(args):
    meta = {}
    side = os.path.join(os.path.dirname(os.path.abspath(args.trace)), "summary.json")
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
    label = args.label or meta.get("label", "AC-CFW")
    method, _, subroutine = label.partition("-")
    eta = args.eta if args.eta is not None else meta.get("eta", 1.5)
    delta = args.delta if args.delta is not None else meta.get("delta", 1.0)
    L = args.L if args.L is not None else meta.get("L")
    n_atoms = args.n_atoms if args.n_atoms is not None else meta.get("n_atoms")
    trace = read_csv(args.trace, method=method, subroutine=subroutine, eta=eta, delta=delta)
    cert = RateCertificate(L=L, provenance={"L": ANALYTIC} if L is not None else {})
    report = audit_trace(trace, cert, eta=eta, n_atoms=n_atoms)
    print(report.format())
    return 0 if report.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="acfw", description="Auto-conditioned Frank-Wolfe experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out", help="output directory for trace.csv, summary.json, config.txt")
    p.add_argument("--stdout-csv", action="store_true", help="write the CSV trace to stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every combination in a grid file")
    p.add_argument("--grid", required=True, help="config file whose values may be comma-separated lists")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("audit", help="audit a CSV trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--label", help="METHOD-SUBROUTINE, e.g. AC-PFW (default: from summary.json)")
    p.add_argument("--eta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--L", type=float, help="global gradient Lipschitz constant")
    p.add_argument("--n-atoms", type=int)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"acfw: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
