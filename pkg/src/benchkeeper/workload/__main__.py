"""Workload program entry point.

Every failure path maps to a documented nonzero exit status with exactly one
diagnostic line on stderr; only a checked, converged solve exits 0.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import (
    EXIT_BREAKDOWN,
    EXIT_NO_CONVERGENCE,
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_USAGE,
)
from .linalg import SingularMatrixError, build_A
from .solver import MODES, check_convergence_precondition, fixed_point_defect, fixed_point_solve, generate_inputs, load_input

PROG = "bk-workload"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="HPD precondition check and fixed-point solve")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--generate", nargs=3, metavar=("SEED", "N", "MODE"), help=f"MODE is one of {', '.join(MODES)}")
    src.add_argument("--input", metavar="PATH", help="JSON input document")
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--max-iter", type=_positive_int)
    p.add_argument("--hpd-samples", type=_positive_int)
    p.add_argument("--metrics", default="metrics.json", help="output path (default: ./metrics.json)")
    return p


def _fail(code: int, message: str) -> int:
    print(f"{PROG}: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _fail(EXIT_USAGE, f"usage error: {exc}")

    try:
        if args.generate:
            seed, n, mode = args.generate
            inp = generate_inputs(int(seed), int(n), mode)
        else:
            inp = load_input(args.input)
        if args.tol is not None:
            inp.tol = args.tol
        if args.max_iter is not None:
            inp.max_iter = args.max_iter
        if args.hpd_samples is not None:
            inp.hpd_samples = args.hpd_samples
    except (OSError, ValueError, TypeError) as exc:
        return _fail(EXIT_USAGE, f"bad input: {exc}")

    verdict = check_convergence_precondition(inp.S1, inp.S2, inp.hpd_samples)
    if not verdict.holds:
        return _fail(
            EXIT_PRECONDITION,
            f"convergence precondition violated at theta={verdict.theta:.6f} (sample {verdict.sample}): {verdict.reason}",
        )

    A1 = build_A(inp.alpha1, inp.S1, inp.H1)
    A2 = build_A(inp.alpha2, inp.S2, inp.H2)
    try:
        result = fixed_point_solve(A1, A2, inp.tol, inp.max_iter)
    except SingularMatrixError as exc:
        return _fail(EXIT_BREAKDOWN, str(exc))
    if not result.converged:
        return _fail(
            EXIT_NO_CONVERGENCE,
            f"no convergence after {result.iterations} iterations (relative update {result.residual:.3e} > tol {inp.tol:.3e})",
        )
    try:
        defect = fixed_point_defect(A1, A2, result.X)
    except SingularMatrixError as exc:
        return _fail(EXIT_BREAKDOWN, f"residual check failed: {exc}")
    if not defect <= 2 * inp.tol:
        return _fail(EXIT_NO_CONVERGENCE, f"converged iterate fails residual check ({defect:.3e} > {2 * inp.tol:.3e})")

    metrics = {
        "iterations": result.iterations,
        "residual": result.residual,
        "elapsed_seconds": time.perf_counter() - started,
        "n": inp.n,
    }
    tmp = args.metrics + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(metrics, fh)
            fh.write("\n")
        os.replace(tmp, args.metrics)
    except OSError as exc:
        return _fail(EXIT_BREAKDOWN, f"cannot write {args.metrics}: {exc}")
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
