"""Command line entry point: ``fdk run | verify | predict``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import harness
from .fracquad import eta_predictors


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fdk", description="Semilinear time-fractional diffusion: dG(0) x P1 solver."
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write its CSV table")
    run.add_argument("--experiment", type=int, choices=(1, 2, 3), required=True)
    run.add_argument("--alpha", type=float, nargs="+", help="override the alpha list")
    run.add_argument("--scale", choices=("desk", "paper"), default="desk",
                     help="paper scale takes hours")
    run.add_argument("--out", default=None, help="CSV path (default: stdout)")
    run.add_argument("--cache", default=None,
                     help="reference cache directory (default: $FDK_CACHE_DIR or ~/.cache/fdk)")
    run.add_argument("--jobs", type=int, default=1, help="rows solved in parallel")
    run.add_argument("--deterministic", action="store_true",
                     help="leave the timing column empty")

    sub.add_parser("verify", help="run the acceptance checks")

    pred = sub.add_parser("predict", help="print the rate predictors eta1 and eta2")
    pred.add_argument("--alpha", type=float, required=True)
    pred.add_argument("--sigma", type=float, required=True)
    pred.add_argument("--J", type=int, required=True)
    return p


def _run(args: argparse.Namespace) -> int:
    try:
        exp = harness.preset(
            args.experiment,
            args.scale,
            alphas=tuple(args.alpha) if args.alpha else None,
            out=args.out,
            cache_dir=args.cache,
        )
    except ValueError as exc:
        print(f"fdk run: {exc}", file=sys.stderr)
        return 2
    rows = harness.run_experiment(exp, jobs=max(1, args.jobs), deterministic=args.deterministic)
    if args.out is None:
        sys.stdout.write(harness.format_csv(rows, args.deterministic))
    failed = [r for r in rows if r.failed is not None]
    for r in failed:
        print(f"fdk run: row alpha={r.alpha} sigma={r.sigma} J={r.J} n_cells={r.n_cells} "
              f"failed: {r.failed}", file=sys.stderr)
    return 1 if failed else 0


def _predict(args: argparse.Namespace) -> int:
    try:
        eta1, eta2 = eta_predictors(args.alpha, args.sigma, args.J)
    except ValueError as exc:
        print(f"fdk predict: {exc}", file=sys.stderr)
        return 2
    for name, val in (("eta1", eta1), ("eta2", eta2)):
        print(f"{name} = {'undefined' if val is None else format(val, '.6e')}")
    return 0


def _verify() -> int:
    from .verification import run_all

    results = run_all()
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return _run(args)
    if args.command == "predict":
        return _predict(args)
    return _verify()


if __name__ == "__main__":
    sys.exit(main())
