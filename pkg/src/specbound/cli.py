"""Command-line interface: ``specbound verify|converge|sweep|report``."""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

from . import __version__
from . import runner
from .config import ConfigError, load_config
from .spectrum import convergence_study


def _levels(text: str):
    try:
        lv = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}")
    return lv


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specbound",
                                description="Numerical checks of first-eigenvalue upper bounds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run every scenario of a config file")
    v.add_argument("--config", required=True)
    v.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    v.add_argument("--format", choices=("csv", "jsonl"), default=None)
    v.add_argument("--jobs", type=int, default=None)

    c = sub.add_parser("converge", help="mesh convergence tables for FEM scenarios")
    c.add_argument("--config", required=True)
    c.add_argument("--levels", type=_levels, default=(3, 4, 5, 6))
    c.add_argument("--out", default=None, help="write convergence.csv here")

    s = sub.add_parser("sweep", help="expand generator scenarios over a seed range")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", required=True, help="inclusive range A..B")
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=("csv", "jsonl"), default=None)
    s.add_argument("--jobs", type=int, default=None)

    r = sub.add_parser("report", help="summarize a results directory")
    r.add_argument("--in", dest="in_dir", required=True)
    return p


def _finish(report, suite, out, fmt) -> int:
    out = out or suite.output.get("dir")
    fmt = fmt or suite.output.get("format", "csv")
    if out:
        for path in runner.emit(report, out, fmt):
            print(f"wrote {path}")
    else:
        sys.stdout.write(runner.to_csv(runner.rows(report)))
    for s in report.errors:
        print(f"error in {s.scenario_id}: {s.error}", file=sys.stderr)
    for s, r in report.violated:
        print(f"VIOLATED {s.scenario_id} {r.check}: margin {r.margin:.6g} "
              f"budget {r.budget:.3g}", file=sys.stderr)
    for s, r in report.equality_failures:
        print(f"equality gap {s.scenario_id} {r.check}: {r.equality_gap:.6g} "
              f"exceeds budget {r.budget:.3g}", file=sys.stderr)
    print(f"suite: {'PASS' if report.passed else 'FAIL'}", file=sys.stderr)
    return report.exit_code


def _converge(suite, levels, out) -> int:
    rows = []
    for sc in suite.scenarios:
        ambient = runner.build_ambient(sc.ambient)
        if ambient.dim != 3:
            print(f"skipping {sc.id}: no finite-element encoding", file=sys.stderr)
            continue
        graph = runner.build_graph(sc, ambient)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            table = convergence_study(graph, levels)
        print(f"{sc.id}: order {table.order:.4f}  extrapolated {table.extrapolated:.12g}  "
              f"budget {table.budget:.3e}")
        for level, lam, p in table.rows():
            print(f"  level {level}  lambda1 {lam:.15g}  order {p:.4f}")
            rows.append((sc.id, level, format(lam, ".17g"), format(p, ".17g")))
    if out:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "convergence.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("scenario_id", "mesh_level", "lambda1", "observed_order"))
            w.writerows(rows)
        print(f"wrote {path}")
    return runner.EXIT_PASS


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            recs = runner.load_results(args.in_dir)
            print(runner.summarize(recs))
            bad = [r for r in recs if r["verdict"] == "VIOLATED"]
            return runner.EXIT_VIOLATED if bad else runner.EXIT_PASS
        suite = load_config(args.config)
        if args.command == "verify":
            report = runner.run(suite, args.jobs)
            return _finish(report, suite, args.out, args.format)
        if args.command == "sweep":
            report = runner.sweep(suite, runner.parse_seed_range(args.seeds), args.jobs)
            return _finish(report, suite, args.out, args.format)
        return _converge(suite, args.levels, args.out)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"specbound: {exc}", file=sys.stderr)
        return runner.EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
