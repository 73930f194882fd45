"""Motion generation (MGM) and refinement (MRM).

Motion fields store displacements in pixels of their own grid, so every 2x
up-sampling also doubles the vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Final, NamedTuple

import numpy as np

from src.core.errors import ConfigurationError, ContractViolation
from src.core.logging import get_logger
from src.core.ops import (
    conv2d,
    leaky_relu,
    sigmoid,
    softmax_groups,
    softmax_groups_adjoint,
    upsample2x_nearest,
)
from src.core.sampling import backward_warp
from src.core.tensor import (
    ConvSpec,
    MotionField,
    OcclusionMap,
    Tensor3,
    as_motion_field,
    as_tensor3,
    require_finite,
    require_multiple,
    require_same_spatial,
)
from src.services.correlation import CorrelationVolume

UPSAMPLE_TAPS: Final[int] = 9
SUBPIXELS: Final[int] = 4
LOGIT_CHANNELS: Final[int] = SUBPIXELS * UPSAMPLE_TAPS
HEAD_CHANNELS: Final[int] = 4 + LOGIT_CHANNELS

# (dy, dx) of each tap, row-major over the 3x3 neighbourhood.
_TAP_OFFSETS: Final[tuple[tuple[int, int], ...]] = tuple(
    (dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
)

FieldPair = tuple[MotionField, MotionField]


@dataclass(frozen=True, slots=True)
class ContextPyramid:
    """Context features at 1/8, 1/4, 1/2 resolution; level i feeds UpBlock i+1."""

    levels: tuple[Tensor3, Tensor3, Tensor3]


@dataclass(frozen=True, slots=True)
class ContextBlockWeights:
    down: ConvSpec
    conv: ConvSpec


@dataclass(frozen=True, slots=True)
class ContextWeights:
    blocks: tuple[ContextBlockWeights, ContextBlockWeights, ContextBlockWeights]


@dataclass(frozen=True, slots=True)
class MGMWeights:
    context: tuple[ConvSpec, ConvSpec, ConvSpec]
    mlp: tuple[ConvSpec, ConvSpec]
    generator: tuple[ConvSpec, ConvSpec]

    def __post_init__(self) -> None:
        if self.generator[-1].out_channels != 4:
            raise ConfigurationError(
                f"motion generator must emit 4 channels, got {self.generator[-1].out_channels}"
            )


@dataclass(frozen=True, slots=True)
class UpBlockWeights:
    trunk: tuple[ConvSpec, ConvSpec]
    head: ConvSpec
    hidden_out: ConvSpec
    hidden_in: ConvSpec | None = None

    def __post_init__(self) -> None:
        if self.head.out_channels != HEAD_CHANNELS:
            raise ConfigurationError(
                f"UpBlock head must emit {HEAD_CHANNELS} channels, got {self.head.out_channels}"
            )


@dataclass(frozen=True, slots=True)
class MRMWeights:
    blocks: tuple[UpBlockWeights, UpBlockWeights, UpBlockWeights]
    occlusion: ConvSpec


class UpBlockOutput(NamedTuple):
    field0: MotionField
    field1: MotionField
    hidden: Tensor3
    warped_context0: Tensor3
    warped_context1: Tensor3


class MRMResult(NamedTuple):
    field0: MotionField
    field1: MotionField
    occlusion: OcclusionMap
    trace: tuple[FieldPair, ...]
    warped_contexts: tuple[tuple[Tensor3, Tensor3], ...]


def extract_context_pyramid(frame: Tensor3, weights: ContextWeights) -> ContextPyramid:
    """Three down-sampling blocks; returns levels ordered 1/8, 1/4, 1/2."""

    frame = require_finite(as_tensor3(frame, name="frame"), name="frame")
    require_multiple(frame, 8, name="extract_context_pyramid frame")
    x = frame
    outs: list[Tensor3] = []
    for block in weights.blocks:
        x = leaky_relu(conv2d(x, block.down))
        x = leaky_relu(conv2d(x, block.conv))
        outs.append(x)
    return ContextPyramid(levels=(outs[2], outs[1], outs[0]))


def mgm_generate(
    dqbc: CorrelationVolume,
    frame0: Tensor3,
    frame1: Tensor3,
    weights: MGMWeights,
) -> FieldPair:
    """``g([c([I0, I1]), m(DQBC)])`` split into two 1/8-resolution fields."""

    frame0 = as_tensor3(frame0, name="frame0")
    frame1 = as_tensor3(frame1, name="frame1", dtype=frame0.dtype)
    require_same_spatial(frame0, frame1, names="mgm frames")
    scores = dqbc.scores.astype(frame0.dtype, copy=False)
    h, w = frame0.shape[:2]
    if scores.shape[:2] != (h // 8, w // 8) or h % 8 or w % 8:
        raise ConfigurationError(
            f"DQBC {scores.shape[:2]} is not at 1/8 of frames {frame0.shape[:2]}"
        )

    ctx = np.concatenate([frame0, frame1], axis=-1)
    for spec in weights.context:
        ctx = leaky_relu(conv2d(ctx, spec))

    reduced = conv2d(leaky_relu(conv2d(scores, weights.mlp[0])), weights.mlp[1])

    x = np.concatenate([ctx, reduced], axis=-1)
    x = leaky_relu(conv2d(x, weights.generator[0]))
    out = conv2d(x, weights.generator[1])
    return out[:, :, 0:2], out[:, :, 2:4]


def _neighbourhood(field: MotionField) -> np.ndarray:
    """(h, w, 9, C) stack of the zero-padded 3x3 neighbourhood of each pixel."""
    h, w, _ = field.shape
    padded = np.pad(field, ((1, 1), (1, 1), (0, 0)))
    return np.stack(
        [padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy, dx in _TAP_OFFSETS],
        axis=2,
    )


def _check_upsample_inputs(field: MotionField, weights_logits: Tensor3) -> tuple[MotionField, Tensor3]:
    field = as_motion_field(field)
    logits = require_finite(
        as_tensor3(weights_logits, name="upsample logits", dtype=field.dtype),
        name="upsample logits",
    )
    if logits.shape[2] != LOGIT_CHANNELS:
        raise ConfigurationError(
            f"convex_upsample needs {LOGIT_CHANNELS} logit channels, got {logits.shape[2]}"
        )
    require_same_spatial(field, logits, names="convex_upsample field/logits")
    return field, logits


def convex_upsample(field: MotionField, weights_logits: Tensor3) -> MotionField:
    """2x up-sampling where each fine vector is twice a softmax-weighted 3x3 mix.

    Logit channel ``(a * 2 + b) * 9 + k`` weights tap ``k`` (row-major over
    (dy, dx)) for fine pixel ``(2y + a, 2x + b)``.
    """

    field, logits = _check_upsample_inputs(field, weights_logits)
    h, w, c = field.shape
    wts = softmax_groups(logits, UPSAMPLE_TAPS).reshape(h, w, SUBPIXELS, UPSAMPLE_TAPS)
    nb = _neighbourhood(field)
    mixed = (wts[..., None] * nb[:, :, None, :, :]).sum(axis=3)
    fine = field.dtype.type(2) * mixed
    # (h, w, a, b, c) -> (h, a, w, b, c)
    return fine.reshape(h, w, 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(2 * h, 2 * w, c)


def convex_upsample_adjoint(
    field: MotionField, weights_logits: Tensor3, grad_out: MotionField
) -> tuple[MotionField, Tensor3]:
    """Cotangents for the coarse field and the logits."""

    field, logits = _check_upsample_inputs(field, weights_logits)
    h, w, c = field.shape
    two = field.dtype.type(2)
    g = np.asarray(grad_out, dtype=field.dtype)
    if g.shape != (2 * h, 2 * w, c):
        raise ConfigurationError(f"convex_upsample cotangent has shape {g.shape}")
    g = g.reshape(h, 2, w, 2, c).transpose(0, 2, 1, 3, 4).reshape(h, w, SUBPIXELS, c)

    probs = softmax_groups(logits, UPSAMPLE_TAPS)
    wts = probs.reshape(h, w, SUBPIXELS, UPSAMPLE_TAPS)
    nb = _neighbourhood(field)

    grad_wts = two * (g[:, :, :, None, :] * nb[:, :, None, :, :]).sum(axis=-1)
    grad_logits = softmax_groups_adjoint(probs, grad_wts.reshape(h, w, LOGIT_CHANNELS), UPSAMPLE_TAPS)

    grad_nb = two * (wts[..., None] * g[:, :, :, None, :]).sum(axis=2)
    grad_padded = np.zeros((h + 2, w + 2, c), dtype=field.dtype)
    for k, (dy, dx) in enumerate(_TAP_OFFSETS):
        grad_padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] += grad_nb[:, :, k]
    return grad_padded[1:-1, 1:-1], grad_logits


def upblock_step(
    index: int,
    fields: FieldPair,
    ctx0: Tensor3,
    ctx1: Tensor3,
    hidden: Tensor3 | None,
    weights: UpBlockWeights,
) -> UpBlockOutput:
    """Refine both fields with a residual and up-sample them by 2."""

    if index not in (1, 2, 3):
        raise ContractViolation(f"UpBlock index must be 1, 2 or 3, got {index}")
    if index == 1 and hidden is not None:
        raise ContractViolation("UpBlock 1 takes no hidden state")
    if index > 1 and hidden is None:
        raise ContractViolation(f"UpBlock {index} requires the previous hidden state")
    if (hidden is None) != (weights.hidden_in is None):
        raise ContractViolation(f"UpBlock {index} weights do not match the hidden-state usage")

    field0 = as_motion_field(fields[0], name="field0")
    field1 = as_motion_field(fields[1], name="field1", dtype=field0.dtype)
    ctx0 = as_tensor3(ctx0, name="ctx0", dtype=field0.dtype)
    ctx1 = as_tensor3(ctx1, name="ctx1", dtype=field0.dtype)
    for name, t in (("field1", field1), ("ctx0", ctx0), ("ctx1", ctx1)):
        require_same_spatial(field0, t, names=f"UpBlock {index} field0/{name}")

    warped0 = backward_warp(ctx0, field0)
    warped1 = backward_warp(ctx1, field1)
    parts = [field0, field1, warped0, warped1]
    if hidden is not None:
        hidden = as_tensor3(hidden, name="hidden", dtype=field0.dtype)
        require_same_spatial(field0, hidden, names=f"UpBlock {index} field0/hidden")
        parts.append(leaky_relu(conv2d(hidden, weights.hidden_in)))

    x = np.concatenate(parts, axis=-1)
    feats = leaky_relu(conv2d(x, weights.trunk[0]))
    feats = leaky_relu(conv2d(feats, weights.trunk[1]))
    head = conv2d(feats, weights.head)

    logits = head[:, :, 4:]
    up0 = convex_upsample(field0 + head[:, :, 0:2], logits)
    up1 = convex_upsample(field1 + head[:, :, 2:4], logits)
    new_hidden = leaky_relu(conv2d(upsample2x_nearest(feats), weights.hidden_out))
    return UpBlockOutput(up0, up1, new_hidden, warped0, warped1)


def run_mrm(
    fields: FieldPair,
    ctx0: ContextPyramid,
    ctx1: ContextPyramid,
    weights: MRMWeights,
) -> MRMResult:
    """Three UpBlocks from 1/8 to full resolution, then the occlusion head on H3."""

    logger = get_logger("dqbc.motion")
    trace: list[FieldPair] = [(fields[0], fields[1])]
    warped: list[tuple[Tensor3, Tensor3]] = []
    current = fields
    hidden: Tensor3 | None = None
    for index, block in enumerate(weights.blocks, start=1):
        out = upblock_step(
            index,
            current,
            ctx0.levels[index - 1],
            ctx1.levels[index - 1],
            hidden,
            block,
        )
        current = (out.field0, out.field1)
        hidden = out.hidden
        trace.append(current)
        warped.append((out.warped_context0, out.warped_context1))
        logger.debug("UpBlock %d -> fields %s", index, out.field0.shape)

    occlusion = sigmoid(conv2d(hidden, weights.occlusion))
    return MRMResult(current[0], current[1], occlusion, tuple(trace), tuple(warped))
