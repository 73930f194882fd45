"""Root logging: a rotating file under ``<data dir>/log`` plus stderr.

stdout is left to command output (reports, bench CSV).
"""
from __future__ import annotations

import contextlib
import logging
import time
from collections.abc import Iterator
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Final

from src.utils.helpers import data_app_path

_LOG_FORMAT: Final[str] = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_OWNED: Final[str] = "_dqbc_handler"
_FILE_MAX_BYTES: Final[int] = 1_000_000
_FILE_BACKUPS: Final[int] = 3

_LEVELS: Final[dict[str, int]] = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def level_from_name(name: str | None, default: int = logging.INFO) -> int:
    return _LEVELS.get(str(name or "").strip().upper(), default)


def _log_file_path() -> Path:
    return data_app_path("dqbc.log", folder_name="log")


def _owned_handlers(root: logging.Logger) -> list[logging.Handler]:
    return [h for h in root.handlers if getattr(h, _OWNED, False)]


def _make_handlers(level: int) -> list[logging.Handler]:
    handlers: list[logging.Handler] = []
    try:
        log_path = _log_file_path()
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(
            RotatingFileHandler(
                log_path,
                maxBytes=_FILE_MAX_BYTES,
                backupCount=_FILE_BACKUPS,
                encoding="utf-8",
            )
        )
    except OSError:
        # Read-only data dir: console only.
        pass
    handlers.append(logging.StreamHandler())

    formatter = logging.Formatter(_LOG_FORMAT)
    for h in handlers:
        h.setLevel(level)
        h.setFormatter(formatter)
        setattr(h, _OWNED, True)
    return handlers


def configure_root_logging(*, level: int = logging.INFO) -> None:
    """Install the file and console handlers once; later calls only move the level."""

    root = logging.getLogger()
    root.setLevel(level)

    owned = _owned_handlers(root)
    if owned:
        for h in owned:
            h.setLevel(level)
        return

    for h in _make_handlers(level):
        root.addHandler(h)
    # numpy RuntimeWarnings (overflow in a bad archive, ...) land in the log.
    logging.captureWarnings(True)


def get_logger(name: str, *, level: int | None = None) -> logging.Logger:
    """Get a component logger, configuring root logging on first use."""

    if not _owned_handlers(logging.getLogger()):
        configure_root_logging()
    logger = logging.getLogger(name)
    if level is not None:
        logger.setLevel(level)
    return logger


@contextlib.contextmanager
def log_duration(logger: logging.Logger, label: str, *, level: int = logging.DEBUG) -> Iterator[None]:
    """Log how long the wrapped block took."""

    start = time.perf_counter()
    try:
        yield
    finally:
        if logger.isEnabledFor(level):
            logger.log(level, "%s took %.3f s", label, time.perf_counter() - start)
