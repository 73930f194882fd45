"""``python -m src``: same as the ``dqbc`` script."""
from __future__ import annotations

from src.entrypoint import run

if __name__ == "__main__":
    run()
