from __future__ import annotations

import os
import sys
from pathlib import Path

DATA_DIR_ENV = "DQBC_DATA_DIR"


def get_data_app_dir(folder_name: str = "", create: bool = True) -> Path:
    """Return the directory used to store logs and settings.

    Override:
        Set env var DQBC_DATA_DIR to force a specific root directory
        (tests point it at a temporary folder).

    Args:
        folder_name: Sub-folder inside the data root ("log", "settings", ...).
        create: Whether to create the folder if it does not exist.

    Returns:
        Path: Absolute path to the data directory.
    """

    override_root = str(os.environ.get(DATA_DIR_ENV, "") or "").strip()
    if override_root:
        root = Path(override_root)
    elif sys.platform == "win32" and os.environ.get("LOCALAPPDATA"):
        root = Path(os.environ["LOCALAPPDATA"]) / "dqbc"
    else:
        root = Path.home() / ".dqbc"

    data_dir = root / folder_name if folder_name else root
    if create:
        data_dir.mkdir(parents=True, exist_ok=True)
    return data_dir


def data_app_path(*parts: str, folder_name: str = "") -> Path:
    """Convenience helper: build a path inside the data directory."""
    return get_data_app_dir(folder_name=folder_name, create=True).joinpath(*parts)


def ensure_parent_dir(path: str | Path) -> Path:
    """Create the parent folder of an output file and return the path."""
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p
