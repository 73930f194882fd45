from __future__ import annotations

import argparse

from src.core.context import RunContext
from src.core.errors import PropertyFailure
from src.services.checks import SUITES, format_report, run_checks


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("check", help="run the property, oracle and gradient suites")
    p.add_argument("suite", nargs="?", default="all", choices=("all",) + SUITES)
    p.set_defaults(handler=cmd_check)


def cmd_check(args: argparse.Namespace, ctx: RunContext) -> int:
    results = run_checks(args.suite)
    print(format_report(results))
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    if failed:
        raise PropertyFailure(f"{len(failed)} check(s) failed", failed)
    ctx.logger.info("check %s: %d passed", args.suite, len(results))
    print(f"all {len(results)} checks passed")
    return 0
