from __future__ import annotations

import sys

from src.app import main
from src.utils.helpers import get_data_app_dir


def run() -> None:
    # Ensure the data folders exist before logging/settings touch them.
    try:
        get_data_app_dir(folder_name="log")
        get_data_app_dir(folder_name="settings")
    except Exception:
        pass

    sys.exit(main())
