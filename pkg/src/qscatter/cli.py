"""``qscatter`` command line.

Exit codes: 0 success, 2 config error, 3 physics infeasibility,
4 failed oracle validation.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

from . import __version__
from .errors import ConfigError
from .fock import run_equivalence_suite
from .scenarios import PointFailure, load_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_VALIDATION = 4


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qscatter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("--config", required=True, help="path to a JSON scenario config")
    run.add_argument("--seed", type=_u64, help="override master_seed")
    run.add_argument("--threads", type=_positive, default=1, help="worker threads (results do not depend on it)")
    run.add_argument("--out-dir", help="override output_dir")

    val = sub.add_parser("validate", help="Gaussian vs truncated-Fock equivalence suite")
    val.add_argument("--circuits", type=_positive, default=200)
    val.add_argument("--seed", type=_u64, default=20090101)
    val.add_argument("--tol", type=float, default=1e-6)
    return parser


def _validate(circuits: int, seed: int, tol: float) -> int:
    t0 = time.perf_counter()
    report = run_equivalence_suite(circuits, seed=seed, tol=tol, log=lambda m: print(m, file=sys.stderr))
    print(f"passed={report.passed} failed={report.failed} refused={report.refused} "
          f"max_error={report.max_error:.3e} wall_time_s={time.perf_counter() - t0:.1f}")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args.circuits, args.seed, args.tol)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
        cfg.raw = {**cfg.raw, "master_seed": args.seed}
    if cfg.scenario == "validate":
        return _validate(200, 20090101, 1e-6)
    try:
        path = run_scenario(cfg, threads=args.threads, out_dir=args.out_dir)
    except PointFailure as exc:
        print(f"physics error at {cfg.sweep_axis}={exc.value}: {exc.cause}", file=sys.stderr)
        return EXIT_PHYSICS
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
