from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from src.core.errors import ConfigurationError
from src.core.tensor import PRECISIONS
from src.services.correlation import PyramidConfig
from src.services.losses import LossConfig
from src.services.model_weights import ModelWidths
from src.utils.helpers import data_app_path, ensure_parent_dir

ENV_ENVIRONMENT = "DQBC_ENV"
ENV_THREADS = "DQBC_THREADS"
MAX_THREADS = 256
MAX_SEED = (1 << 64) - 1

DEFAULT_CONFIG_TOML = """[APPLICATION]
environment = "production"

[RUNTIME]
# Worker threads for row-parallel kernels. Results are identical for any value.
threads = 1
# DEBUG, INFO, WARNING or ERROR
log_level = "INFO"
"""


# ---------------------------------------------------------------------------
# Application settings (TOML)
# ---------------------------------------------------------------------------


def get_config_path() -> Path:
    # Stored under: <data dir>/settings/config.toml
    return data_app_path("config.toml", folder_name="settings")


def ensure_default_config() -> tuple[Path, bool, str | None]:
    """Ensure config.toml exists; create with defaults if missing.

    Returns:
        (path, created_template, error_message)
    """
    path = get_config_path()
    if path.exists():
        return path, False, None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(DEFAULT_CONFIG_TOML, encoding="utf-8")
        return path, True, None
    except Exception as ex:
        return path, False, str(ex)


def _toml_loads(text: str) -> dict[str, Any]:
    """Parse TOML into a python dict.

    Uses stdlib `tomllib` when available; falls back to `tomli`.
    """
    try:
        import tomllib  # py>=3.11

        return tomllib.loads(text)
    except ModuleNotFoundError:
        import tomli  # type: ignore

        return tomli.loads(text)


def load_config_toml() -> tuple[dict[str, Any], Path, str | None]:
    """Load the application settings TOML.

    Returns:
        (config_dict, path, error_message)
    """
    path, _created, err = ensure_default_config()
    if err:
        return {}, path, err

    try:
        raw = path.read_text(encoding="utf-8-sig")
        return _toml_loads(raw or ""), path, None
    except Exception as ex:
        return {}, path, str(ex)


@dataclass(frozen=True)
class ApplicationConfig:
    environment: str = "production"


@dataclass(frozen=True)
class RuntimeConfig:
    threads: int = 1
    log_level: str = "INFO"


def _section(cfg: dict[str, Any], name: str) -> dict[str, Any]:
    sec = cfg.get(name) if isinstance(cfg, dict) else None
    return sec if isinstance(sec, dict) else {}


def get_application_config() -> tuple[ApplicationConfig, str | None]:
    """Read [APPLICATION]; ``DQBC_ENV`` overrides the environment."""

    env_override = str(os.environ.get(ENV_ENVIRONMENT, "") or "").strip()
    cfg, _path, err = load_config_toml()
    if err:
        return ApplicationConfig(environment=env_override or "production"), err

    app = _section(cfg, "APPLICATION")
    try:
        env = str(app.get("environment", "production") or "production").strip()
    except Exception:
        env = "production"

    return ApplicationConfig(environment=env_override or env or "production"), None


def _clamp_threads(value: Any, default: int = 1) -> int:
    try:
        n = int(value)
    except Exception:
        return default
    if n < 1:
        return 1
    if n > MAX_THREADS:
        return MAX_THREADS
    return n


def get_runtime_config() -> tuple[RuntimeConfig, str | None]:
    """Read [RUNTIME]; ``DQBC_THREADS`` overrides the thread count."""

    env_threads = str(os.environ.get(ENV_THREADS, "") or "").strip()
    cfg, _path, err = load_config_toml()
    sec = {} if err else _section(cfg, "RUNTIME")

    threads = _clamp_threads(sec.get("threads", RuntimeConfig.threads))
    if env_threads:
        threads = _clamp_threads(env_threads, threads)

    try:
        level = str(sec.get("log_level", RuntimeConfig.log_level) or "INFO").strip().upper()
    except Exception:
        level = RuntimeConfig.log_level
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = RuntimeConfig.log_level

    return RuntimeConfig(threads=threads, log_level=level), err


def resolve_thread_count(cli_threads: int | None) -> int:
    """``--threads`` beats ``DQBC_THREADS`` beats the TOML setting."""
    if cli_threads is not None:
        return _clamp_threads(cli_threads)
    runtime, _err = get_runtime_config()
    return runtime.threads


# ---------------------------------------------------------------------------
# RunConfig (JSON)
# ---------------------------------------------------------------------------

_RUN_KEYS = frozenset({"pyramid", "widths", "loss", "t", "seed", "precision"})
_PYRAMID_KEYS = frozenset({"levels", "radii", "normalize_by_sqrt_c"})
_LOSS_KEYS = frozenset({"lambda1", "lambda2", "distill_level_weights"})


@dataclass(frozen=True)
class RunConfig:
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    widths: ModelWidths = field(default_factory=ModelWidths)
    loss: LossConfig = field(default_factory=LossConfig)
    t: float = 0.5
    seed: int = 42
    precision: str = "float32"

    def __post_init__(self) -> None:
        t = float(self.t)
        if not math.isfinite(t) or not 0.0 <= t <= 1.0:
            raise ConfigurationError(f"t must lie in [0, 1], got {self.t}")
        object.__setattr__(self, "t", t)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.precision not in PRECISIONS:
            raise ConfigurationError(
                f"precision must be one of {sorted(PRECISIONS)}, got {self.precision!r}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "pyramid": {
                "levels": self.pyramid.levels,
                "radii": list(self.pyramid.radii),
                "normalize_by_sqrt_c": self.pyramid.normalize_by_sqrt_c,
            },
            "widths": self.widths.to_dict(),
            "loss": {
                "lambda1": self.loss.lambda1,
                "lambda2": self.loss.lambda2,
                "distill_level_weights": list(self.loss.distill_level_weights),
            },
            "t": self.t,
            "seed": self.seed,
            "precision": self.precision,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        doc = _object(data, "run config", _RUN_KEYS)
        kwargs: dict[str, Any] = {}
        if "pyramid" in doc:
            pyr = _object(doc["pyramid"], "pyramid", _PYRAMID_KEYS)
            defaults = PyramidConfig()
            radii = pyr.get("radii", defaults.radii)
            levels = pyr.get("levels", len(radii) if "radii" in pyr else defaults.levels)
            kwargs["pyramid"] = PyramidConfig(
                levels=_int(levels, "pyramid.levels"),
                radii=tuple(_int(r, "pyramid.radii") for r in _list(radii, "pyramid.radii")),
                normalize_by_sqrt_c=_bool(pyr.get("normalize_by_sqrt_c", False), "pyramid.normalize_by_sqrt_c"),
            )
        if "widths" in doc:
            overrides = _object(doc["widths"], "widths", None)
            try:
                kwargs["widths"] = ModelWidths().with_overrides(overrides)
            except (TypeError, ValueError) as ex:
                raise ConfigurationError(f"invalid widths: {ex}") from ex
        if "loss" in doc:
            loss = _object(doc["loss"], "loss", _LOSS_KEYS)
            if "distill_level_weights" in loss:
                loss = dict(loss)
                loss["distill_level_weights"] = tuple(
                    _list(loss["distill_level_weights"], "loss.distill_level_weights")
                )
            try:
                kwargs["loss"] = LossConfig(**loss)
            except (TypeError, ValueError) as ex:
                raise ConfigurationError(f"invalid loss config: {ex}") from ex
        if "t" in doc:
            kwargs["t"] = doc["t"]
        if "seed" in doc:
            kwargs["seed"] = _int(doc["seed"], "seed")
        if "precision" in doc:
            kwargs["precision"] = str(doc["precision"])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f"invalid run config: {ex}") from ex

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as ex:
            raise ConfigurationError(f"run config is not valid JSON: {ex}") from ex
        return cls.from_dict(data)


def _object(value: Any, where: str, allowed: frozenset[str] | None) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    if allowed is not None:
        unknown = sorted(set(value) - allowed)
        if unknown:
            raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return value


def _list(value: Any, where: str) -> list[Any]:
    if not isinstance(value, (list, tuple)):
        raise ConfigurationError(f"{where} must be a list")
    return list(value)


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{where} must be an integer, got {value!r}")
    return value


def _bool(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{where} must be true or false, got {value!r}")
    return value


def load_run_config(path: str | Path | None) -> RunConfig:
    """Read a RunConfig JSON file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    return RunConfig.from_json(Path(path).read_text(encoding="utf-8-sig"))


def save_run_config(config: RunConfig, path: str | Path) -> Path:
    p = ensure_parent_dir(path)
    p.write_text(config.to_json() + "\n", encoding="utf-8")
    return p
