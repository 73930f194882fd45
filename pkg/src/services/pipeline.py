"""End-to-end mid-frame interpolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import ConfigurationError, DataError, InputValidationError
from src.core.logging import get_logger, log_duration
from src.core.ops import crop, pad_reflect_to_multiple
from src.core.sampling import backward_warp
from src.core.tensor import MotionField, OcclusionMap, Tensor3, resolve_dtype
from src.services.correlation import PyramidConfig, assemble_dqbc
from src.services.model_weights import ModelWeights
from src.services.motion import FieldPair, extract_context_pyramid, mgm_generate, run_mrm
from src.services.synthesis import (
    SynthesisInputs,
    compose_frame,
    final_occlusion,
    synthnet_forward,
)


@dataclass(frozen=True, slots=True)
class Diagnostics:
    """Intermediate results, cropped to the input size except for the trace."""

    field0: MotionField
    field1: MotionField
    occlusion: OcclusionMap
    occlusion_final: OcclusionMap
    residual: Tensor3
    trace: tuple[FieldPair, ...]
    padded_shape: tuple[int, int]


def validate_frames(frame0: np.ndarray, frame1: np.ndarray) -> None:
    """Raise InputValidationError unless both are same-size RGB frames in [0, 1]."""

    for name, f in (("frame0", frame0), ("frame1", frame1)):
        if f.ndim != 3 or f.shape[2] != 3:
            raise InputValidationError(f"{name}: expected (H, W, 3), got shape {f.shape}")
        if min(f.shape[:2]) <= 0:
            raise InputValidationError(f"{name}: empty frame")
        if not np.isfinite(f).all():
            raise InputValidationError(f"{name}: contains non-finite values")
        if f.min() < 0.0 or f.max() > 1.0:
            raise InputValidationError(f"{name}: values must lie in [0, 1]")
    if frame0.shape != frame1.shape:
        raise InputValidationError(
            f"frame sizes differ: {frame0.shape[1]}x{frame0.shape[0]} vs "
            f"{frame1.shape[1]}x{frame1.shape[0]}"
        )


def interpolate_midframe(
    frame0: Tensor3,
    frame1: Tensor3,
    weights: ModelWeights,
    config: PyramidConfig | None = None,
    t: float = 0.5,
    *,
    precision: str = "float32",
) -> tuple[Tensor3, Diagnostics]:
    """Synthesize the frame at time ``t`` between ``frame0`` and ``frame1``.

    Frames are reflect-padded to a multiple of 8, run through correlation,
    motion generation and refinement, warping and synthesis, then cropped
    back. The returned frame is clamped to [0, 1].
    """

    logger = get_logger("dqbc.pipeline")
    config = config or PyramidConfig()
    dtype = resolve_dtype(precision)
    f0 = np.asarray(frame0)
    f1 = np.asarray(frame1)
    validate_frames(f0, f1)
    f0 = f0.astype(dtype, copy=False)
    f1 = f1.astype(dtype, copy=False)

    p0, (h, w) = pad_reflect_to_multiple(f0, 8)
    p1, _ = pad_reflect_to_multiple(f1, 8)
    logger.debug("interpolating %dx%d (padded %dx%d) at t=%.3f", w, h, p0.shape[1], p0.shape[0], t)

    try:
        with log_duration(logger, "correlation"):
            dqbc = assemble_dqbc(p0, p1, weights.dqbc, config, t)
        with log_duration(logger, "motion"):
            coarse = mgm_generate(dqbc, p0, p1, weights.mgm)
            ctx0 = extract_context_pyramid(p0, weights.context)
            ctx1 = extract_context_pyramid(p1, weights.context)
            mrm = run_mrm(coarse, ctx0, ctx1, weights.mrm)

        with log_duration(logger, "synthesis"):
            warped0 = backward_warp(p0, mrm.field0)
            warped1 = backward_warp(p1, mrm.field1)
            residual, delta_o = synthnet_forward(
                SynthesisInputs(warped0, warped1, mrm.occlusion, mrm.warped_contexts),
                weights.synth,
            )
        frame = compose_frame(warped0, warped1, mrm.occlusion, delta_o, residual, clamp_output=True)
    except DataError as ex:
        # Finite inputs went non-finite inside the network: the weights are bad.
        raise ConfigurationError(f"non-finite intermediate result: {ex}") from ex

    diagnostics = Diagnostics(
        field0=crop(mrm.field0, h, w),
        field1=crop(mrm.field1, h, w),
        occlusion=crop(mrm.occlusion, h, w),
        occlusion_final=crop(final_occlusion(mrm.occlusion, delta_o), h, w),
        residual=crop(residual, h, w),
        trace=mrm.trace,
        padded_shape=(int(p0.shape[0]), int(p0.shape[1])),
    )
    return crop(frame, h, w), diagnostics
