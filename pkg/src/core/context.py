from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from src.core.logging import get_logger
from src.services.config_service import (
    ApplicationConfig,
    RunConfig,
    RuntimeConfig,
    get_application_config,
    get_runtime_config,
    load_run_config,
    resolve_thread_count,
)


@dataclass(frozen=True, slots=True)
class RunContext:
    """Everything a command needs besides its own arguments.

    Keeping this small helps avoid hard coupling across commands.
    """

    run: RunConfig
    app: ApplicationConfig
    runtime: RuntimeConfig
    threads: int
    weights_path: Path | None = None
    logger_name: str = "dqbc.cli"

    @property
    def logger(self):
        return get_logger(self.logger_name)

    @property
    def env_lower(self) -> str:
        return str(self.app.environment or "production").strip().lower()


def build_context(
    *,
    config_path: str | Path | None = None,
    weights_path: str | Path | None = None,
    seed: int | None = None,
    threads: int | None = None,
    logger_name: str = "dqbc.cli",
) -> RunContext:
    """Assemble settings from the TOML file, the environment and CLI flags."""

    run = load_run_config(config_path)
    if seed is not None:
        run = replace(run, seed=seed)
    app_cfg, _app_err = get_application_config()
    runtime_cfg, _rt_err = get_runtime_config()
    return RunContext(
        run=run,
        app=app_cfg,
        runtime=runtime_cfg,
        threads=resolve_thread_count(threads),
        weights_path=Path(weights_path) if weights_path else None,
        logger_name=logger_name,
    )
