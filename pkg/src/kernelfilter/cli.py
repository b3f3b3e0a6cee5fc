"""Command-line entry point: ``kernelfilter {demo,track,bench,selftest}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .harness import load_config, run_demo2d, run_experiment, track


def _common(parser: argparse.ArgumentParser, trials: bool = True) -> None:
    parser.add_argument("--config", help="INI file with [experiment], [model] and [kernel] sections")
    parser.add_argument("--problem", choices=("bearing", "lorenz96", "linear"), help="problem to run")
    parser.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    parser.add_argument("--out-dir", help="directory for CSV output and summary.txt")
    parser.add_argument("--filters", help='roster such as "kernel:20, pf:5000, enkf:2000"')
    if trials:
        parser.add_argument("--trials", type=int, help="number of repeated trials")
        parser.add_argument("--workers", type=int, help="process pool size for trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernelfilter", description="Adaptive kernel filtering experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the filters")
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="two-dimensional density propagation example, writes grid CSVs")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out-dir", default="results/demo2d")
    demo.add_argument("--kernels", type=int, default=6, help="maximum number of boosting kernels")
    demo.add_argument("--grid-points", type=int, default=161)

    tr = sub.add_parser("track", help="one trial with per-step records")
    _common(tr, trials=False)
    tr.add_argument("--trial", type=int, default=0, help="trial index (seed = base seed + index)")

    bench = sub.add_parser("bench", help="repeated-trial RMSE study")
    _common(bench)

    sub.add_parser("selftest", help="run quick oracle checks")
    return parser


def _config(args):
    overrides = dict(
        problem=args.problem,
        base_seed=args.seed,
        out_dir=args.out_dir,
        filters=args.filters,
        num_trials=getattr(args, "trials", None),
        workers=getattr(args, "workers", None),
    )
    return load_config(args.config, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")

    if args.command == "demo":
        report = run_demo2d(args.out_dir, seed=args.seed, max_kernels=args.kernels, grid_points=args.grid_points)
        print(f"integral of F: {report.integral:.8f}")
        print(f"correlation(linear-only, F): {report.correlation:.6f}")
        for k, mse in enumerate(report.residual_mse, start=1):
            print(f"grid MSE with {k} kernel(s): {mse:.6e}")
        print(f"wrote grids to {Path(args.out_dir)}")
        return 0

    if args.command == "selftest":
        from .selftest import run_selftest

        return 0 if run_selftest() else 1

    cfg = _config(args)
    if args.command == "track":
        record = track(cfg, args.trial)
        dims = list(cfg.build_problem().error_dims)
        print(f"trial {record.index} (seed {record.seed})")
        for label, outcome in record.outcomes.items():
            err = np.linalg.norm(outcome.estimates[:, dims] - record.truth[:, dims], axis=1)
            status = "diverged" if outcome.diverged else "ok"
            print(f"{label:<14} final error {err[-1]:.4f}  mean error {np.nanmean(err):.4f}  "
                  f"{outcome.seconds:.2f}s  {status}")
        if cfg.out_dir:
            print(f"wrote per-step records to {Path(cfg.out_dir)}")
        return 0

    report, _ = run_experiment(cfg)
    print(report.table())
    if cfg.out_dir:
        print(f"wrote results to {Path(cfg.out_dir)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
