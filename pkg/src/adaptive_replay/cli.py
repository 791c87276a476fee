"""Command-line entry point.

Subcommands::

    adaptive-replay run <spec.ini>     execute an experiment spec
    adaptive-replay verify             run the full property/oracle test suite
    adaptive-replay bench              store index micro-benchmarks
    adaptive-replay metrics <trace..>  summarize trace CSVs forming a seed group

Output locations honor ``--out`` first and the ``ADAPTIVE_REPLAY_OUT``
environment variable as the output root otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bench import run_bench
from .harness import (
    OUTPUT_ROOT_ENV,
    metrics_from_traces,
    parse_config,
    resolve_output_dir,
    run_suite,
)
from .reporting import METRICS_HEADER, METRICS_SCHEMA, write_bench


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-replay",
        description="Variance-minimizing adaptive experience sampling: experiments and checks.",
        epilog=f"Outputs land under --out, else ${OUTPUT_ROOT_ENV}/<output_dir>, else <output_dir>.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment spec file")
    run_p.add_argument("spec", help="INI spec file (see README for the key schema)")
    run_p.add_argument("--seed-list", help="comma-separated seed override", default=None)
    run_p.add_argument("--out", help="output directory override", default=None)
    run_p.add_argument("--workers", type=int, default=1, help="parallel cell workers")

    verify_p = sub.add_parser("verify", help="run the full property/oracle suite (pytest)")
    verify_p.add_argument(
        "--tests",
        default=None,
        help="tests directory (default: ./tests relative to the current directory)",
    )
    verify_p.add_argument("--fast", action="store_true", help="skip the slow acceptance tests")

    bench_p = sub.add_parser("bench", help="store index micro-benchmarks")
    bench_p.add_argument("--capacity", type=int, default=1_000_000)
    bench_p.add_argument("--batch", type=int, default=256)
    bench_p.add_argument("--rounds", type=int, default=200)
    bench_p.add_argument("--out", default=None, help="also write a bench CSV here")

    metrics_p = sub.add_parser("metrics", help="summarize trace CSVs (one seed group)")
    metrics_p.add_argument("traces", nargs="+", help="trace CSV files")
    metrics_p.add_argument("--window", type=int, default=10, help="moving-average width")
    return parser


def _cmd_run(args) -> int:
    spec = parse_config(args.spec)
    if args.seed_list:
        seeds = tuple(int(s) for s in args.seed_list.split(",") if s.strip())
        spec.seeds = seeds
    return run_suite(spec, out=args.out, workers=args.workers)


def _cmd_verify(args) -> int:
    import pytest

    tests_dir = Path(args.tests) if args.tests else Path.cwd() / "tests"
    if not tests_dir.is_dir():
        print(f"error: tests directory not found at {tests_dir}", file=sys.stderr)
        return 2
    pytest_args = [str(tests_dir), "-v"]
    if args.fast:
        pytest_args += ["--ignore", str(tests_dir / "test_acceptance.py")]
    return pytest.main(pytest_args)


def _cmd_bench(args) -> int:
    rows = run_bench(capacity=args.capacity, batch=args.batch, rounds=args.rounds)
    for capacity, operation, batch, rounds, ops in rows:
        print(f"capacity={capacity} {operation:>14s}: {ops:,.0f} ops/s (batch={batch})")
    if args.out:
        out = resolve_output_dir(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_bench(out / "bench.csv", rows)
        print(f"wrote {out / 'bench.csv'}")
    return 0


def _cmd_metrics(args) -> int:
    row = metrics_from_traces(args.traces, window=args.window)
    print(f"# schema={METRICS_SCHEMA}")
    print(METRICS_HEADER)
    print(
        f"-,-,-,-,{len(args.traces)},{row.learning_speed!r},{row.max_score!r},"
        f"{row.learning_stability!r},{row.robustness!r},{row.final_performance!r}"
    )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "verify": _cmd_verify,
    "bench": _cmd_bench,
    "metrics": _cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
