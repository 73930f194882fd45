from __future__ import annotations

import argparse
import sys

from src.core.context import RunContext
from src.core.errors import ConfigurationError
from src.services.bench import BENCH_OPS, DEFAULT_SIZES, parse_size, run_bench, write_csv


def _size_arg(text: str) -> tuple[int, int, int]:
    try:
        return parse_size(text)
    except ConfigurationError as ex:
        raise argparse.ArgumentTypeError(str(ex)) from ex


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("bench", help="time the heavy kernels and print CSV")
    p.add_argument(
        "--op",
        action="append",
        choices=("all",) + BENCH_OPS,
        help="kernel to time (repeatable; default all)",
    )
    p.add_argument(
        "--size",
        action="append",
        type=_size_arg,
        help="HxWxC feature size (repeatable; default 32x32x96)",
    )
    p.add_argument("--repetitions", type=int, default=5)
    p.set_defaults(handler=cmd_bench)


def cmd_bench(args: argparse.Namespace, ctx: RunContext) -> int:
    ops = list(args.op or ["all"])
    if "all" in ops:
        ops = list(BENCH_OPS)
    sizes = list(args.size or DEFAULT_SIZES)
    rows = run_bench(ops, sizes, args.repetitions, ctx.run.pyramid, seed=ctx.run.seed)
    write_csv(rows, sys.stdout)
    ctx.logger.info("bench: %d rows", len(rows))
    return 0
