"""Argument parsing and subcommand dispatch."""
from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

from src.commands import bench, check, fit_motion, init_weights, interpolate
from src.core.context import RunContext, build_context
from src.core.errors import EXIT_VALIDATION, DqbcError
from src.core.logging import configure_root_logging, get_logger, level_from_name
from src.core.parallel import set_num_threads
from src.core.safe import safe_command

PROG = "dqbc"
_COMMANDS = (interpolate, check, bench, fit_motion, init_weights)


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from ex
    if not 0 <= value < (1 << 64):
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from ex
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Synthesize the middle frame of two images (DQBC motion estimation).",
    )
    parser.add_argument("--config", default=None, help="RunConfig JSON file")
    parser.add_argument("--weights", default=None, help="DQBW weight archive")
    parser.add_argument("--seed", type=_u64, default=None, help="override the run seed")
    parser.add_argument("--threads", type=_positive_int, default=None, help="worker threads")
    parser.add_argument(
        "--log-level",
        default=None,
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="console/file log level (default from settings)",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for module in _COMMANDS:
        module.register(sub)
    return parser


def _prepare(args: argparse.Namespace) -> RunContext:
    ctx = build_context(
        config_path=args.config,
        weights_path=args.weights,
        seed=args.seed,
        threads=args.threads,
    )
    configure_root_logging(level=level_from_name(args.log_level or ctx.runtime.log_level))
    set_num_threads(ctx.threads)
    get_logger("dqbc.cli").debug(
        "command %s, threads %d, precision %s", args.command, ctx.threads, ctx.run.precision
    )
    return ctx


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = _prepare(args)
    except DqbcError as exc:
        # A broken --config is a usage problem, not a crash.
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code else EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    handler = safe_command(args.handler, label=args.command, env_lower=ctx.env_lower)
    return handler(args, ctx)
