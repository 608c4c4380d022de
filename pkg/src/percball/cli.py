"""Command line front end: one subcommand per experiment mode.

Examples:

    percball cross --epsilon 0.1 --lambda 0.5 --n 10000 --seeds 100 --out cross.csv
    percball percolation --p 0.9 --lambda 1 --n 2000 --seeds 50
    percball shape --p 0.95 --n 500 --seeds 3 --out boundary.csv
    percball verify --epsilon 0.2 --n 100 --seeds 100

Exit status is nonzero when any exact-identity check fails.
"""

from __future__ import annotations

import argparse
import sys

from .backend import backend_name
from .experiments import (
    MODES,
    ExperimentSpec,
    run_experiment,
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--epsilon", type=float, help="closed-edge probability")
    group.add_argument("--p", type=float, help="open-edge probability (p = 1 - epsilon)")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.0,
                     help="direction parameter in [0, 1] (target height n*eps*lambda)")
    sub.add_argument("--n", type=int, default=1000,
                     help="system size (columns / steps; radius for shape)")
    sub.add_argument("--seeds", type=int, default=10, help="number of replicas")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--out", type=str, default=None, help="CSV/JSON output path")
    sub.add_argument("--box-margin", type=float, default=0.25,
                     help="conditioning box margin as a fraction of n")
    sub.add_argument("--bound-A", dest="bound_a", type=float, default=None,
                     help="override the frozen upper sandwich constant")
    sub.add_argument("--workers", type=int, default=1, help="replica worker threads")
    sub.add_argument("--dump", type=str, default=None,
                     help="optional trace/trajectory dump path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percball",
        description="Percolation ball shapes via the cross-model / particle coupling",
    )
    subs = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        _add_common(subs.add_parser(mode))
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    eps = args.epsilon if args.epsilon is not None else 1.0 - args.p
    return ExperimentSpec(
        mode=args.mode,
        eps=eps,
        lam=args.lam,
        n=args.n,
        seeds=args.seeds,
        master_seed=args.seed,
        out=args.out,
        box_margin=args.box_margin,
        bound_a=args.bound_a,
        workers=args.workers,
        dump=args.dump,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = spec_from_args(args)
    print(f"[percball] mode={spec.mode} eps={spec.eps} lambda={spec.lam} "
          f"n={spec.n} seeds={spec.seeds} master-seed={spec.master_seed} "
          f"backend={backend_name()}")
    summary = run_experiment(spec)
    if spec.mode == "verify":
        report = summary["report"]
        for line in report.lines():
            print(line)
        if not report.passed:
            return 1
        return 0
    for key, value in summary.items():
        if key in ("records", "boundaries"):
            continue
        print(f"  {key}: {value}")
    if spec.out:
        print(f"  wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
