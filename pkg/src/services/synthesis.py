"""SynthNet and final frame composition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import ConfigurationError
from src.core.logging import get_logger
from src.core.ops import conv2d, leaky_relu, upsample2x_nearest
from src.core.tensor import (
    ConvSpec,
    OcclusionMap,
    Tensor3,
    as_occlusion_map,
    as_tensor3,
    require_channels,
    require_multiple,
    require_same_spatial,
)


@dataclass(frozen=True, slots=True)
class ConvDownWeights:
    down: ConvSpec
    conv: ConvSpec

    def __post_init__(self) -> None:
        if self.down.stride != 2:
            raise ConfigurationError("ConvDown: first conv must have stride 2")


@dataclass(frozen=True, slots=True)
class SynthUpWeights:
    fuse: ConvSpec
    rb_conv0: ConvSpec
    rb_conv1: ConvSpec
    out: ConvSpec


@dataclass(frozen=True, slots=True)
class SynthWeights:
    down: tuple[ConvDownWeights, ConvDownWeights, ConvDownWeights]
    up: tuple[SynthUpWeights, SynthUpWeights, SynthUpWeights]
    head: ConvSpec

    def __post_init__(self) -> None:
        if self.head.out_channels != 4:
            raise ConfigurationError(
                f"SynthNet head must emit 4 channels (R + dO), got {self.head.out_channels}"
            )


@dataclass(frozen=True, slots=True)
class SynthesisInputs:
    """Warped frames, occlusion and the MRM warped-context pairs (1/8, 1/4, 1/2)."""

    warped0: Tensor3
    warped1: Tensor3
    occlusion: OcclusionMap
    warped_contexts: tuple[tuple[Tensor3, Tensor3], ...]

    def __post_init__(self) -> None:
        if len(self.warped_contexts) != 3:
            raise ConfigurationError(
                f"SynthNet needs 3 warped-context pairs, got {len(self.warped_contexts)}"
            )


def _residual_block(x: Tensor3, conv0: ConvSpec, conv1: ConvSpec) -> Tensor3:
    return x + conv2d(leaky_relu(conv2d(x, conv0)), conv1)


def _check_inputs(inputs: SynthesisInputs) -> tuple[Tensor3, Tensor3, OcclusionMap]:
    w0 = require_channels(as_tensor3(inputs.warped0, name="warped0"), 3, name="warped0")
    w1 = require_channels(
        as_tensor3(inputs.warped1, name="warped1", dtype=w0.dtype), 3, name="warped1"
    )
    occ = as_occlusion_map(inputs.occlusion, dtype=w0.dtype)
    require_same_spatial(w0, w1, names="SynthNet warped frames")
    require_same_spatial(w0, occ, names="SynthNet warped0/occlusion")
    require_multiple(w0, 8, name="SynthNet inputs")

    h, w = w0.shape[:2]
    for k, pair in enumerate(inputs.warped_contexts):
        expected = (h >> (3 - k), w >> (3 - k))
        for ctx in pair:
            if ctx.shape[:2] != expected:
                raise ConfigurationError(
                    f"warped context {k} is {ctx.shape[:2]}, expected {expected}"
                )
    return w0, w1, occ


def synthnet_forward(inputs: SynthesisInputs, weights: SynthWeights) -> tuple[Tensor3, Tensor3]:
    """U-Net pass returning the residual image R and the residual occlusion dO."""

    logger = get_logger("dqbc.synthesis")
    w0, w1, occ = _check_inputs(inputs)
    dtype = w0.dtype
    x0 = np.concatenate([w0, w1, occ], axis=-1)

    skips: list[Tensor3] = []
    x = x0
    for block in weights.down:
        x = leaky_relu(conv2d(x, block.down))
        x = leaky_relu(conv2d(x, block.conv))
        skips.append(x)

    # Deepest skip at 1/8 starts the decoder; the shallower ones join on the way up.
    prev: Tensor3 | None = None
    for k, block in enumerate(weights.up):
        ctx0, ctx1 = inputs.warped_contexts[k]
        parts = [] if prev is None else [prev]
        parts += [skips[2 - k], ctx0.astype(dtype, copy=False), ctx1.astype(dtype, copy=False)]
        y = leaky_relu(conv2d(np.concatenate(parts, axis=-1), block.fuse))
        y = _residual_block(y, block.rb_conv0, block.rb_conv1)
        prev = leaky_relu(conv2d(upsample2x_nearest(y), block.out))

    head = conv2d(np.concatenate([prev, x0], axis=-1), weights.head)
    logger.debug("SynthNet head %s", head.shape)
    return head[:, :, 0:3], head[:, :, 3:4]


def final_occlusion(occlusion: OcclusionMap, delta_o: Tensor3) -> OcclusionMap:
    """``clamp(O + dO, 0, 1)``."""
    return np.clip(occlusion + delta_o, 0.0, 1.0).astype(occlusion.dtype, copy=False)


def compose_frame(
    warped0: Tensor3,
    warped1: Tensor3,
    occlusion: OcclusionMap,
    delta_o: Tensor3,
    residual: Tensor3,
    *,
    clamp_output: bool = False,
) -> Tensor3:
    """``O_f * warped0 + (1 - O_f) * warped1 + R`` with ``O_f = clamp(O + dO, 0, 1)``.

    Clamping to [0, 1] is left to the image-output boundary unless
    ``clamp_output`` is set.
    """

    warped0 = as_tensor3(warped0, name="warped0")
    dtype = warped0.dtype
    warped1 = as_tensor3(warped1, name="warped1", dtype=dtype)
    occ = as_occlusion_map(occlusion, dtype=dtype)
    delta_o = as_tensor3(delta_o, name="delta_o", dtype=dtype)
    residual = as_tensor3(residual, name="residual", dtype=dtype)
    for name, t in (("warped1", warped1), ("occlusion", occ), ("delta_o", delta_o), ("residual", residual)):
        require_same_spatial(warped0, t, names=f"compose_frame warped0/{name}")
    if warped1.shape != warped0.shape or residual.shape != warped0.shape:
        raise ConfigurationError("compose_frame: warped frames and residual must share a shape")

    o_final = final_occlusion(occ, delta_o)
    out = o_final * warped0 + (dtype.type(1) - o_final) * warped1 + residual
    if clamp_output:
        out = np.clip(out, 0.0, 1.0).astype(dtype, copy=False)
    return out
