from __future__ import annotations

import sys
from collections.abc import Callable
from typing import Any

from src.core.errors import EXIT_IO, DqbcError, report_exception_sync
from src.core.logging import get_logger


def safe_command(
    handler: Callable[..., int],
    *,
    label: str,
    env_lower: str = "production",
    swallow: bool = True,
) -> Callable[..., int]:
    """Wrap a subcommand so every failure becomes an exit status.

    Toolkit errors print a one-line message and use their own exit code;
    anything else is reported through the error log and maps to 1.
    """

    logger = get_logger("dqbc.cli")

    def _wrapped(*args: Any, **kwargs: Any) -> int:
        try:
            return int(handler(*args, **kwargs) or 0)
        except DqbcError as exc:
            try:
                logger.error("%s failed: %s", label, exc)
            except Exception:
                pass
            print(f"error: {exc}", file=sys.stderr)
            if not swallow:
                raise
            return exc.exit_code
        except OSError as exc:
            try:
                logger.error("%s I/O failure: %s", label, exc)
            except Exception:
                pass
            print(f"error: {exc}", file=sys.stderr)
            if not swallow:
                raise
            return EXIT_IO
        except Exception as exc:
            report_exception_sync(exc, where=label, env_lower=env_lower)
            if not swallow:
                raise
            return EXIT_IO

    return _wrapped
