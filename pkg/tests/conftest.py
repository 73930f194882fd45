"""Shared fixtures.

The data directory (logs, settings) is redirected to a temporary folder for
every test so nothing touches the user's home directory.
"""
from __future__ import annotations

import logging

import numpy as np
import pytest

from src.core.parallel import set_num_threads
from src.services.config_service import RunConfig
from src.services.correlation import PyramidConfig
from src.services.losses import LossConfig
from src.services.model_weights import ModelWeights, ModelWidths
from src.services.weight_init import init_weights

SMALL_WIDTHS = ModelWidths(
    extractor=(4, 6, 8),
    context=(4, 4, 6),
    mgm_context=4,
    mgm_hidden=8,
    mgm_out=8,
    mgm_generator=8,
    trunk=8,
    hidden=6,
    synth_encoder=(4, 6, 8),
    synth_decoder=(8, 6, 6),
)


def _drop_root_handlers() -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_dqbc_handler", False):
            root.removeHandler(handler)
            handler.close()


@pytest.fixture(autouse=True)
def data_dir(tmp_path, monkeypatch):
    root = tmp_path / "data"
    monkeypatch.setenv("DQBC_DATA_DIR", str(root))
    monkeypatch.delenv("DQBC_THREADS", raising=False)
    monkeypatch.delenv("DQBC_ENV", raising=False)
    # log handlers bind the data dir and stderr of the test that created them
    _drop_root_handlers()
    set_num_threads(1)
    yield root
    set_num_threads(1)
    _drop_root_handlers()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config() -> RunConfig:
    return RunConfig(
        pyramid=PyramidConfig(levels=2, radii=(1, 1)),
        widths=SMALL_WIDTHS,
        loss=LossConfig(),
        seed=7,
    )


@pytest.fixture
def small_archive(small_config):
    return init_weights(small_config)


@pytest.fixture
def small_model(small_archive, small_config) -> ModelWeights:
    return ModelWeights.from_archive(small_archive, small_config.pyramid)


@pytest.fixture
def zero_model(small_config) -> ModelWeights:
    """Small model with every kernel zeroed (biases are already zero)."""

    archive = init_weights(small_config)
    for name in archive.names():
        archive.add(name, np.zeros_like(archive[name]))
    return ModelWeights.from_archive(archive, small_config.pyramid)


@pytest.fixture
def texture():
    return smooth_frame


def smooth_frame(height: int, width: int, phase: float = 0.0) -> np.ndarray:
    """Band-limited RGB texture in [0.2, 0.8]."""

    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    two_pi = 2.0 * np.pi
    channels = [
        np.sin(two_pi * (x / 41.0 + y / 53.0) + phase),
        np.cos(two_pi * (x / 47.0 - y / 37.0) + 0.7 + phase),
        np.sin(two_pi * (y / 43.0) + 1.3) * np.cos(two_pi * (x / 59.0) + phase),
    ]
    return 0.5 + 0.3 * np.stack(channels, axis=-1)
