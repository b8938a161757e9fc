#!/usr/bin/env python3
"""
Run the 64-bit finite-difference suite over every block and the end-to-end model.

Prints one row per block; exits with code 3 when any block exceeds the tolerance.
"""
import argparse
import sys

import pandas as pd

from ..data.exporter import format_table
from ..model.grad_suite import run_suite
from ..utils.errors import EXIT_OK, GradCheckFailure
from ..utils.grad_check import DEFAULT_H, DEFAULT_TOL
from ..utils.logging_utils import setup_logging
from .common import ArgumentParser, execute


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scale", type=str, default="tiny", help="Model size to check")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="Maximum relative error")
    parser.add_argument("--h", type=float, default=DEFAULT_H, help="Finite-difference step")
    parser.add_argument("--seed", type=int, default=0, help="Seed for inputs and parameters")
    parser.add_argument("--inject-bug", action="store_true",
                        help="Use a sigmoid with a wrong backward rule (must fail)")
    parser.add_argument("--progress", action="store_true", help="Show progress bars")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def run(args: argparse.Namespace) -> int:
    setup_logging(quiet=args.quiet)
    reports = run_suite(args.scale, inject_bug=args.inject_bug, seed=args.seed,
                        h=args.h, tol=args.tol, progress=args.progress)
    table = pd.DataFrame([{
        'block': r.name,
        'max_rel_error': f"{r.max_rel_error:.3e}",
        'max_abs_error': f"{r.max_abs_error:.3e}",
        'checked': r.n_checked,
        'status': 'pass' if r.passed else 'FAIL',
    } for r in reports])
    print(format_table(table), end='')
    failed = [r for r in reports if not r.passed]
    if failed:
        raise GradCheckFailure("gradient check failed for " + ", ".join(
            f"{r.name} ({r.worst_param}{list(r.worst_index)}, rel {r.max_rel_error:.2e})" for r in failed))
    return EXIT_OK


def main(argv=None) -> int:
    parser = ArgumentParser(description="Finite-difference gradient checks")
    add_arguments(parser)
    return execute(run, parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
