"""Command-line entry point: ``zklab run|report|dump-weights|psido-test|ground-state``."""

import argparse
import json
import os
import sys

import numpy as np

from ..psido import (
    CATALOG,
    catalog_symbol,
    class_seminorms,
    continuity_ratios,
    remainder_curve,
    schwartz_ensemble,
)
from ..spectral import make_grid, write_snapshot
from ..weights import CutoffFamily
from .config import EXPERIMENTS, OUTPUT_ENV, ConfigError, load_config
from .runner import ReportError, dump_json, load_manifest, report, run


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError([f"override {item!r} must look like section.key=value"])
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _output_root(args):
    return args.output or os.environ.get(OUTPUT_ENV, "zklab-runs")


def cmd_run(args):
    cfg = load_config(args.config, args.experiment, _overrides(args.set))
    directory = args.output or cfg.output
    if directory is None and args.config:
        stem = os.path.splitext(os.path.basename(args.config))[0]
        directory = os.path.join(os.environ.get(OUTPUT_ENV, "zklab-runs"), stem)
    directory = directory or cfg.output_dir()
    manifest, _ = run(cfg, directory)
    report(manifest)
    for name, ok in manifest.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for name, ok in manifest.informational.items():
        print(f"info  {name} ({'yes' if ok else 'no'})")
    if manifest.error:
        print(f"run aborted: {manifest.error}", file=sys.stderr)
    print(f"wrote {directory} ({manifest.wall_clock:.1f} s)")
    return 0 if manifest.passed else 1


def cmd_report(args):
    manifest, _ = load_manifest(args.run_dir)
    paths = report(manifest, args.output)
    for p in paths[:2]:
        print(p)
    return 0 if manifest.passed else 1


def cmd_dump_weights(args):
    fam = CutoffFamily(args.eps, args.tau)
    x = np.linspace(args.x_min if args.x_min is not None else -fam.tau,
                    args.x_max if args.x_max is not None else 2 * fam.tau, args.samples)
    cols = np.column_stack([x, fam.chi(x), fam.phi(x), fam.psi(x), fam.chi(x, 1)])
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        out.write("x,chi,phi,psi,chi_prime\n")
        for row in cols:
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if args.output:
            out.close()
    return 0


def psido_test_report(symbol, order, points, seed, box_length=32.0, samples=20, eps=3.0, tau=15.0):
    """Seminorms, self-composition remainders and continuity ratios of one catalog symbol."""
    cutoff = CutoffFamily(eps, tau)
    grid = make_grid(1, box_length, points)
    sym = catalog_symbol(symbol, 1, m=1.0, q=1.0, cutoff=cutoff)
    ensemble = schwartz_ensemble(1, box_length, size=samples, seed=seed)
    table = class_seminorms(sym, grid)
    return {
        "symbol": symbol,
        "order": order,
        "grid_points": points,
        "seed": seed,
        "seminorms": table.to_dict(),
        "remainder_curve": remainder_curve(sym, sym, grid, ensemble, tuple(range(1, order + 1))),
        "continuity_ratios": continuity_ratios(sym, box_length, 1, (points, 2 * points), ensemble),
    }


def cmd_psido_test(args):
    rep = psido_test_report(args.symbol, args.order, args.grid_points, args.seed)
    text = json.dumps(rep, sort_keys=True, indent=2)
    if args.output:
        dump_json(rep, args.output)
    else:
        print(text)
    return 1 if rep["seminorms"]["diverges"] else 0


def cmd_ground_state(args):
    from ..evolve import ground_state

    grid = make_grid(2, args.box_length, args.points)
    gs = ground_state(grid, args.c, method=args.method, tol=args.tol)
    directory = os.path.join(_output_root(args), "ground-state")
    os.makedirs(directory, exist_ok=True)
    snap = os.path.join(directory, f"Q_c{args.c:g}.ddl")
    write_snapshot(snap, gs.Q)
    info = {"c": gs.c, "residual": gs.residual, "decay_rate": gs.decay_rate,
            "iterations": gs.n_iter, "snapshot": snap, "box_length": args.box_length,
            "points": args.points, "method": args.method}
    dump_json(info, os.path.join(directory, f"Q_c{args.c:g}.json"))
    print(json.dumps(info, sort_keys=True, indent=2))
    return 0 if gs.residual < args.tol else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="zklab", description="Weighted-decay experiments for ZK and KdV.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment and write its report")
    p.add_argument("config", nargs="?", help="INI config file")
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment id (overrides the file)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    p.add_argument("--output", help=f"run directory (default: ${OUTPUT_ENV}/<experiment>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="regenerate CSV/JSON/plot data from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--output", help="directory for the report files (default: the run directory)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dump-weights", help="sample the cutoff family as CSV")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=2.5)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_dump_weights)

    p = sub.add_parser("psido-test", help="seminorms, remainders and continuity of a catalog symbol")
    p.add_argument("--symbol", choices=CATALOG, default="product")
    p.add_argument("--order", type=int, default=3, choices=(1, 2, 3, 4))
    p.add_argument("--grid-points", type=int, default=64)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_psido_test)

    p = sub.add_parser("ground-state", help="compute the ZK ground state Q_c")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--box-length", type=float, default=64.0)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--method", choices=("scaled", "direct"), default="scaled")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--output", help=f"output root (default: ${OUTPUT_ENV})")
    p.set_defaults(func=cmd_ground_state)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ReportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
