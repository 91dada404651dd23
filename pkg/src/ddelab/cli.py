"""Command-line entry point: ``ddelab <task> --scenario <file> [--out <dir>]``.

Every task accepts a scenario file; ``spectrum`` and ``threshold`` also take
direct flags for quick interactive use.  Exit codes: 0 all verdicts resolved,
2 validation failure, 3 at least one verdict unresolved.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .scenarios import TASKS, ScenarioError, run_scenario
from .spectrum import spectrum_report
from .threshold import find_dstar

__all__ = ["main"]


def _worker_cap() -> int:
    try:
        return max(1, int(os.environ.get("DDELAB_THREADS", "1")))
    except ValueError:
        return 1


def _add_common(p):
    p.add_argument("--scenario", help="scenario JSON file (or a manifest embedding one)")
    p.add_argument("--out", help="output directory (default: ./<scenario name>)")


def _run_from_scenario(args, task: str) -> int:
    if not args.scenario:
        print(f"error: task '{task}' needs --scenario", file=sys.stderr)
        return 2
    try:
        result = run_scenario(args.scenario, out_dir=args.out)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(result.artifacts)} artifacts to {result.out_dir}")
    for art in result.artifacts:
        print(f"  {art}")
    if result.unresolved:
        print("warning: unresolved verdicts present", file=sys.stderr)
        return 3
    return 0


def _spectrum_direct(args) -> int:
    rep = spectrum_report(args.rate, args.slope, args.pairs)
    print(f"{'root':>10} {'re':>18} {'im':>18} {'residual':>12}")
    print(f"{'real':>10} {rep.lambda0:>18.12f} {0.0:>18.12f} {'-':>12}")
    for i, ((re, im), res) in enumerate(zip(rep.pairs, rep.residuals), start=1):
        print(f"{'pair ' + str(i):>10} {re:>18.12f} {im:>18.12f} {res:>12.2e}")
    print(f"window: ({rep.beta_window[0]:.12f}, {rep.beta_window[1]:.12f})")
    return 0


def _threshold_direct(args) -> int:
    res = find_dstar(args.c, tol=args.tol, T_max=args.Tmax)
    print(json.dumps({"c": args.c, **res.to_dict()}, indent=1))
    return 3 if res.unresolved else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ddelab", description="delay-equation laboratory")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run a '{task}' scenario")
        _add_common(p)
        if task == "spectrum":
            p.add_argument("--rate", type=float)
            p.add_argument("--slope", type=float)
            p.add_argument("--pairs", type=int, default=5)
        if task == "threshold":
            p.add_argument("--c", type=float)
            p.add_argument("--tol", type=float, default=1e-4)
            p.add_argument("--Tmax", type=float, default=400.0)

    args = parser.parse_args(argv)
    os.environ.setdefault("DDELAB_THREADS", str(_worker_cap()))

    if args.task == "spectrum" and args.scenario is None and args.rate is not None and args.slope is not None:
        return _spectrum_direct(args)
    if args.task == "threshold" and args.scenario is None and args.c is not None:
        return _threshold_direct(args)
    return _run_from_scenario(args, args.task)


if __name__ == "__main__":
    sys.exit(main())
