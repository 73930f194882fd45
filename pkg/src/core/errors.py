from __future__ import annotations

import traceback
from collections.abc import Iterable
from typing import Optional

from src.core.logging import get_logger
from src.utils.helpers import data_app_path

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_PROPERTY = 3


class DqbcError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code: int = EXIT_IO


class ConfigurationError(DqbcError):
    """Shapes, channel counts, resolutions or config values do not agree."""

    exit_code = EXIT_VALIDATION


class ContractViolation(DqbcError):
    """A documented precondition (even size, multiple of 8, ...) was violated."""

    exit_code = EXIT_VALIDATION


class DataError(DqbcError):
    """A tensor crossing a public boundary holds NaN or Inf."""

    exit_code = EXIT_VALIDATION


class InputValidationError(DqbcError):
    exit_code = EXIT_VALIDATION


class ArchiveFormatError(DqbcError):
    """The weight archive bytes are not a valid DQBW file."""

    exit_code = EXIT_IO


class ArchiveValidationError(DqbcError):
    """The archive is well-formed but does not match the pipeline."""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, names: Iterable[str] = ()) -> None:
        self.names = tuple(names)
        if self.names:
            message = f"{message}: {', '.join(self.names)}"
        super().__init__(message)


class ImageIOError(DqbcError):
    exit_code = EXIT_IO


class VerificationFailure(DqbcError):
    """A gradient check produced non-finite values."""

    exit_code = EXIT_PROPERTY


class PropertyFailure(DqbcError):
    exit_code = EXIT_PROPERTY

    def __init__(self, message: str, failures: Iterable[str] = ()) -> None:
        self.failures = tuple(failures)
        if self.failures:
            message = f"{message}: {', '.join(self.failures)}"
        super().__init__(message)


class DivergenceError(DqbcError):
    exit_code = EXIT_PROPERTY


def capture_traceback() -> str:
    """Best-effort capture of the current exception traceback."""

    try:
        return traceback.format_exc()
    except Exception:
        return ""


def write_error_log_sync(
    text: str, *, log_filename: str = "error.log", folder_name: str = "log"
) -> None:
    """Append text to the error log in the data directory."""

    if not text:
        return

    log_path = data_app_path(log_filename, folder_name=folder_name)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("a", encoding="utf-8") as f:
        f.write(text)
        if not text.endswith("\n"):
            f.write("\n")
        f.write("\n")


def report_exception_sync(
    exc: BaseException,
    *,
    where: str,
    env_lower: str,
    logger_name: str = "errors",
    traceback_text: Optional[str] = None,
) -> None:
    """Log an unexpected exception and (optionally) persist it to error.log.

    - Always logs to the configured logger.
    - In production, also appends the full traceback to log/error.log.
    - Otherwise prints the traceback to stderr (best-effort) to aid dev.
    """

    logger = get_logger(logger_name)

    try:
        logger.exception("%s: %s", where, exc, exc_info=exc)
    except Exception:
        pass

    tb = traceback_text if traceback_text is not None else capture_traceback()

    if str(env_lower or "production").strip().lower() == "production":
        try:
            write_error_log_sync(tb)
        except Exception:
            pass
    else:
        try:
            traceback.print_exc()
        except Exception:
            pass
