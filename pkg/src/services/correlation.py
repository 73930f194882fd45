"""Densely queried bilateral correlation.

Queries stay at the feature resolution; keys form an average-pooled pyramid.
Channels are ordered level-major, then row-major over the window (j outer,
i inner), and carry their displacement vector in query-resolution pixels.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Final, NamedTuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.logging import get_logger
from src.core.ops import avgpool2x, avgpool2x_adjoint, conv2d, crop, leaky_relu
from src.core.sampling import sample_bilinear, sample_bilinear_adjoint
from src.core.tensor import (
    ConvSpec,
    Tensor3,
    as_tensor3,
    require_finite,
    require_multiple,
)

DIRECTION_0_TO_1: Final[int] = 0
DIRECTION_1_TO_0: Final[int] = 1


@dataclass(frozen=True, slots=True)
class PyramidConfig:
    levels: int = 3
    radii: tuple[int, ...] = (6, 5, 4)
    normalize_by_sqrt_c: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        if self.levels < 1:
            raise ConfigurationError(f"pyramid levels must be positive, got {self.levels}")
        if len(self.radii) != self.levels:
            raise ConfigurationError(
                f"pyramid needs {self.levels} radii, got {len(self.radii)}"
            )
        if any(r < 1 for r in self.radii):
            raise ConfigurationError(f"pyramid radii must be >= 1, got {self.radii}")

    @property
    def channels_per_direction(self) -> int:
        return sum((2 * r + 1) ** 2 for r in self.radii)

    def window(self, level: int) -> list[tuple[int, int]]:
        """Integer (i, j) window indices of one level, row-major over (j, i)."""
        r = self.radii[level]
        return [(i, j) for j in range(-r, r + 1) for i in range(-r, r + 1)]


class ChannelMeta(NamedTuple):
    level: int
    dx: int
    dy: int
    direction: int


@dataclass(frozen=True, slots=True)
class CorrelationVolume:
    scores: Tensor3
    meta: tuple[ChannelMeta, ...]

    def __post_init__(self) -> None:
        if self.scores.ndim != 3 or self.scores.shape[2] != len(self.meta):
            raise ConfigurationError(
                f"correlation volume has {self.scores.shape} scores for {len(self.meta)} channels"
            )

    @property
    def channels(self) -> int:
        return int(self.scores.shape[2])

    @property
    def displacements(self) -> np.ndarray:
        """(C, 2) array of (dx, dy) per channel."""
        return np.array([(m.dx, m.dy) for m in self.meta], dtype=np.int64).reshape(-1, 2)

    def with_scores(self, scores: Tensor3) -> "CorrelationVolume":
        return CorrelationVolume(scores=scores, meta=self.meta)


@dataclass(frozen=True, slots=True)
class KeyPyramid:
    levels: tuple[Tensor3, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.levels)


@dataclass(frozen=True, slots=True)
class FeatureExtractorWeights:
    convs: tuple[ConvSpec, ConvSpec, ConvSpec]

    def __post_init__(self) -> None:
        if len(self.convs) != 3 or any(c.stride != 2 for c in self.convs):
            raise ConfigurationError("feature extractor needs exactly three stride-2 convs")


@dataclass(frozen=True, slots=True)
class EnhancementWeights:
    conv0: ConvSpec
    conv1: ConvSpec


@dataclass(frozen=True, slots=True)
class DQBCWeights:
    extractor: FeatureExtractorWeights
    enhancement: EnhancementWeights


def channel_meta(config: PyramidConfig, direction: int) -> tuple[ChannelMeta, ...]:
    meta: list[ChannelMeta] = []
    for level in range(config.levels):
        step = 2**level
        for i, j in config.window(level):
            meta.append(ChannelMeta(level, step * i, step * j, direction))
    return tuple(meta)


def extract_features(frame: Tensor3, weights: FeatureExtractorWeights) -> Tensor3:
    """Three stride-2 convs to 1/8 resolution; hidden layers use leaky ReLU."""

    frame = require_finite(as_tensor3(frame, name="frame"), name="frame")
    require_multiple(frame, 8, name="extract_features frame")
    x = frame
    for k, spec in enumerate(weights.convs):
        x = conv2d(x, spec)
        if k < len(weights.convs) - 1:
            x = leaky_relu(x)
    return x


def build_key_pyramid(features: Tensor3, config: PyramidConfig) -> KeyPyramid:
    features = as_tensor3(features, name="key features")
    require_multiple(features, 2 ** (config.levels - 1), name="key features")
    levels = [features]
    for _ in range(config.levels - 1):
        levels.append(avgpool2x(levels[-1]))
    return KeyPyramid(levels=tuple(levels))


def _check_gather_inputs(queries: Tensor3, keys: KeyPyramid, config: PyramidConfig) -> Tensor3:
    queries = require_finite(as_tensor3(queries, name="queries"), name="queries")
    if len(keys) != config.levels:
        raise ConfigurationError(
            f"key pyramid has {len(keys)} levels, config expects {config.levels}"
        )
    base = keys.levels[0]
    if base.shape != queries.shape:
        raise ConfigurationError(
            f"queries {queries.shape} and level-0 keys {base.shape} must match"
        )
    return queries


def _level_grid(shape: tuple[int, ...], level: int, dtype: np.dtype) -> tuple[np.ndarray, np.ndarray]:
    # Query (x_q, y_q) maps to key coordinate (x_q / 2^l, y_q / 2^l).
    h, w = shape[0], shape[1]
    scale = dtype.type(2.0**-level)
    xs = np.broadcast_to(np.arange(w, dtype=dtype)[None, :] * scale, (h, w))
    ys = np.broadcast_to(np.arange(h, dtype=dtype)[:, None] * scale, (h, w))
    return xs, ys


def gather_unilateral_correlation(
    queries: Tensor3,
    keys: KeyPyramid,
    config: PyramidConfig,
    *,
    direction: int = DIRECTION_0_TO_1,
) -> CorrelationVolume:
    """Inner products of every query with its local window on every key level."""

    queries = _check_gather_inputs(queries, keys, config)
    dtype = queries.dtype
    h, w, c = queries.shape
    scores = np.empty((h, w, config.channels_per_direction), dtype=dtype)
    ch = 0
    for level in range(config.levels):
        key = keys.levels[level].astype(dtype, copy=False)
        xs, ys = _level_grid(queries.shape, level, dtype)
        for i, j in config.window(level):
            sampled = sample_bilinear(key, xs + dtype.type(i), ys + dtype.type(j))
            scores[:, :, ch] = (queries * sampled).sum(axis=-1)
            ch += 1
    if config.normalize_by_sqrt_c:
        scores /= dtype.type(np.sqrt(c))
    return CorrelationVolume(scores=scores, meta=channel_meta(config, direction))


def gather_unilateral_correlation_adjoint(
    queries: Tensor3,
    keys: KeyPyramid,
    config: PyramidConfig,
    grad_scores: Tensor3,
) -> tuple[Tensor3, Tensor3]:
    """Cotangents for the queries and for the level-0 key features."""

    queries = _check_gather_inputs(queries, keys, config)
    dtype = queries.dtype
    g = np.asarray(grad_scores, dtype=dtype)
    if config.normalize_by_sqrt_c:
        g = g / dtype.type(np.sqrt(queries.shape[2]))

    grad_q = np.zeros_like(queries)
    grad_levels: list[Tensor3] = []
    ch = 0
    for level in range(config.levels):
        key = keys.levels[level].astype(dtype, copy=False)
        xs, ys = _level_grid(queries.shape, level, dtype)
        grad_key = np.zeros_like(key)
        for i, j in config.window(level):
            xi = xs + dtype.type(i)
            yj = ys + dtype.type(j)
            sampled = sample_bilinear(key, xi, yj)
            gch = g[:, :, ch : ch + 1]
            grad_q += gch * sampled
            gk, _, _ = sample_bilinear_adjoint(key, xi, yj, gch * queries)
            grad_key += gk
            ch += 1
        grad_levels.append(grad_key)

    grad_base = grad_levels[-1]
    for level in range(config.levels - 2, -1, -1):
        grad_base = grad_levels[level] + avgpool2x_adjoint(grad_base)
    return grad_q, grad_base


def enhance_correlation(corr: CorrelationVolume, weights: EnhancementWeights) -> CorrelationVolume:
    """Residual denoising block: ``corr + conv1(act(conv0(corr)))``."""

    c = corr.channels
    for spec in (weights.conv0, weights.conv1):
        if spec.in_channels != c or spec.out_channels != c:
            raise ConfigurationError(
                f"enhancement conv {spec.out_channels}x{spec.in_channels} does not match {c} channels"
            )
    hidden = leaky_relu(conv2d(corr.scores, weights.conv0))
    return corr.with_scores(corr.scores + conv2d(hidden, weights.conv1))


def _distribute_coords(corr: CorrelationVolume, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    scores = corr.scores
    dtype = scores.dtype
    h, w, _ = scores.shape
    disp = corr.displacements.astype(np.float64) * float(fraction)
    shift_x = disp[:, 0].astype(dtype)
    shift_y = disp[:, 1].astype(dtype)
    xs = np.arange(w, dtype=dtype)[None, :, None] - shift_x[None, None, :]
    ys = np.arange(h, dtype=dtype)[:, None, None] - shift_y[None, None, :]
    xs = np.broadcast_to(xs, scores.shape)
    ys = np.broadcast_to(ys, scores.shape)
    return xs, ys


def distribute_correlation(corr: CorrelationVolume, fraction: float) -> CorrelationVolume:
    """Translate every channel by ``fraction`` times its displacement vector."""

    fraction = float(fraction)
    require_finite(corr.scores, name="correlation scores")
    if fraction == 0.0:
        return corr.with_scores(corr.scores.copy())
    xs, ys = _distribute_coords(corr, fraction)
    return corr.with_scores(sample_bilinear(corr.scores, xs, ys))


def distribute_correlation_adjoint(
    corr: CorrelationVolume, fraction: float, grad_scores: Tensor3
) -> tuple[Tensor3, float]:
    """Cotangents for the scores and for the scalar fraction."""

    fraction = float(fraction)
    xs, ys = _distribute_coords(corr, fraction)
    grad_scores_in, gx, gy = sample_bilinear_adjoint(corr.scores, xs, ys, grad_scores)
    disp = corr.displacements.astype(np.float64)
    # Sample point is p - fraction * v, so d/dfraction = -v . grad_coords.
    grad_fraction = -float(
        (gx.astype(np.float64) * disp[:, 0]).sum() + (gy.astype(np.float64) * disp[:, 1]).sum()
    )
    return grad_scores_in, grad_fraction


def concat_volumes(volumes: Sequence[CorrelationVolume]) -> CorrelationVolume:
    scores = np.concatenate([v.scores for v in volumes], axis=-1)
    meta = tuple(m for v in volumes for m in v.meta)
    return CorrelationVolume(scores=scores, meta=meta)


def _zero_pad_to_multiple(x: Tensor3, multiple: int) -> Tensor3:
    pad_h = (-x.shape[0]) % multiple
    pad_w = (-x.shape[1]) % multiple
    if pad_h == 0 and pad_w == 0:
        return x
    return np.pad(x, ((0, pad_h), (0, pad_w), (0, 0)))


def _bidirectional_gather(
    feats0: Tensor3, feats1: Tensor3, config: PyramidConfig
) -> tuple[CorrelationVolume, CorrelationVolume]:
    """UniCorr 0->1 and 1->0 at the feature size.

    Feature maps not divisible by ``2^(L-1)`` are zero-padded for the key
    pyramid, matching the zero-outside sampling policy, and the scores are
    cropped back.
    """

    h, w = feats0.shape[:2]
    padded0 = _zero_pad_to_multiple(feats0, 2 ** (config.levels - 1))
    padded1 = _zero_pad_to_multiple(feats1, 2 ** (config.levels - 1))
    uni_01 = gather_unilateral_correlation(
        padded0, build_key_pyramid(padded1, config), config, direction=DIRECTION_0_TO_1
    )
    uni_10 = gather_unilateral_correlation(
        padded1, build_key_pyramid(padded0, config), config, direction=DIRECTION_1_TO_0
    )
    if padded0.shape[:2] != (h, w):
        uni_01 = uni_01.with_scores(np.ascontiguousarray(crop(uni_01.scores, h, w)))
        uni_10 = uni_10.with_scores(np.ascontiguousarray(crop(uni_10.scores, h, w)))
    return uni_01, uni_10


def assemble_dqbc(
    frame0: Tensor3,
    frame1: Tensor3,
    weights: DQBCWeights,
    config: PyramidConfig,
    t: float = 0.5,
    *,
    extractor: Callable[[Tensor3], Tensor3] | None = None,
) -> CorrelationVolume:
    """``[Dist_0->t(Enh(UniCorr_0->1)), Dist_1->t(Enh(UniCorr_1->0))]``.

    ``extractor`` replaces the learned feature extractor (used to exercise the
    correlation stage with hand-made features).
    """

    logger = get_logger("dqbc.correlation")
    frame0 = as_tensor3(frame0, name="frame0")
    frame1 = as_tensor3(frame1, name="frame1", dtype=frame0.dtype)
    if frame0.shape != frame1.shape:
        raise ConfigurationError(f"frames differ in shape: {frame0.shape} vs {frame1.shape}")
    if not 0.0 <= float(t) <= 1.0:
        raise ConfigurationError(f"t must lie in [0, 1], got {t}")

    if extractor is None:
        feats0 = extract_features(frame0, weights.extractor)
        feats1 = extract_features(frame1, weights.extractor)
    else:
        require_multiple(frame0, 8, name="assemble_dqbc frames")
        feats0 = as_tensor3(extractor(frame0), name="features0")
        feats1 = as_tensor3(extractor(frame1), name="features1")

    uni_01, uni_10 = _bidirectional_gather(feats0, feats1, config)
    uni_01 = enhance_correlation(uni_01, weights.enhancement)
    uni_10 = enhance_correlation(uni_10, weights.enhancement)

    bi_t0 = distribute_correlation(uni_01, t)
    bi_t1 = distribute_correlation(uni_10, 1.0 - float(t))
    dqbc = concat_volumes((bi_t0, bi_t1))
    logger.debug("DQBC assembled: %s from frames %s", dqbc.scores.shape, frame0.shape)
    return dqbc
