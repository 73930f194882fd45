"""Deterministic weight initialisation.

Draws come from SplitMix64: the k-th output (k = 1, 2, ...) is
``mix(seed + k * 0x9E3779B97F4A7C15)`` in wrapping 64-bit arithmetic, so the
stream can be evaluated in vectorised form and is identical on every platform.
A draw ``z`` becomes a float64 uniform ``u = (z >> 11) * 2**-53`` in [0, 1).

Kernels take ``(2u - 1) * sqrt(6 / fan_in)`` (computed in float64, then
rounded to float32) from one global stream, tensor after tensor in archive
order. Biases are zero and consume no draws.
"""
from __future__ import annotations

import math
from typing import Final

import numpy as np

from src.core.logging import get_logger
from src.services.config_service import RunConfig
from src.services.model_weights import layer_specs
from src.services.weight_archive import WeightArchive

GOLDEN_GAMMA: Final[int] = 0x9E3779B97F4A7C15
_MIX1: Final[int] = 0xBF58476D1CE4E5B9
_MIX2: Final[int] = 0x94D049BB133111EB
_MASK64: Final[int] = (1 << 64) - 1


class SplitMix64:
    """Counter-based SplitMix64 stream."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & _MASK64
        self.counter = 0

    @staticmethod
    def mix(z: np.ndarray) -> np.ndarray:
        z = z.astype(np.uint64, copy=True)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def next_u64(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + ks * np.uint64(GOLDEN_GAMMA)
            return self.mix(state)

    def next_uniform(self, n: int) -> np.ndarray:
        """Float64 uniforms in [0, 1) with 53 random bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def init_weights(config: RunConfig | None = None, *, seed: int | None = None) -> WeightArchive:
    """Build the complete archive for ``config`` (pyramid, widths, seed).

    ``seed`` overrides ``config.seed``.
    """

    config = config or RunConfig()
    rng = SplitMix64(config.seed if seed is None else seed)
    archive = WeightArchive()
    for layer in layer_specs(config.pyramid, config.widths):
        shape = layer.kernel_shape
        fan_in = layer.in_channels * layer.kernel * layer.kernel
        bound = math.sqrt(6.0 / fan_in)
        u = rng.next_uniform(int(np.prod(shape)))
        kernel = ((2.0 * u - 1.0) * bound).astype(np.float32).reshape(shape)
        archive.add(f"{layer.name}.kernel", kernel)
        archive.add(f"{layer.name}.bias", np.zeros(layer.out_channels, dtype=np.float32))

    get_logger("dqbc.archive").debug(
        "initialised %d tensors (%d parameters) from seed %d",
        len(archive),
        archive.parameter_count,
        rng.seed,
    )
    return archive
