"""Training losses and the PSNR metric.

All reductions are means so values do not depend on resolution.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Final

import numpy as np

from src.core.errors import ConfigurationError
from src.core.ops import resize_bilinear
from src.core.sampling import backward_warp
from src.core.tensor import (
    MotionField,
    OcclusionMap,
    Tensor3,
    as_motion_field,
    as_occlusion_map,
    as_tensor3,
    require_same_spatial,
)

DEFAULT_LEVEL_WEIGHTS: Final[tuple[float, ...]] = (1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True, slots=True)
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 0.01
    distill_level_weights: tuple[float, ...] = DEFAULT_LEVEL_WEIGHTS

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.distill_level_weights)
        object.__setattr__(self, "distill_level_weights", weights)
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        for name, value in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value}")
        if len(weights) != 4:
            raise ConfigurationError(
                f"distill_level_weights needs 4 entries, got {len(weights)}"
            )
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ConfigurationError(
                f"distill_level_weights must be finite and >= 0, got {weights}"
            )


def _pair(a: Tensor3, b: Tensor3, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ConfigurationError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
    return a.astype(np.float64, copy=False), b.astype(np.float64, copy=False)


def reconstruction_loss(predicted: Tensor3, truth: Tensor3) -> float:
    """Mean absolute difference."""
    a, b = _pair(predicted, truth, "reconstruction_loss")
    return float(np.mean(np.abs(a - b)))


def teacher_reconstruction_loss(
    frame0: Tensor3,
    frame1: Tensor3,
    teacher_fields: tuple[MotionField, MotionField],
    occlusion: OcclusionMap,
    truth: Tensor3,
) -> float:
    """L1 of the occlusion blend of frames warped by the teacher fields."""

    frame0 = as_tensor3(frame0, name="frame0")
    dtype = frame0.dtype
    frame1 = as_tensor3(frame1, name="frame1", dtype=dtype)
    m0 = as_motion_field(teacher_fields[0], name="teacher field 0", dtype=dtype)
    m1 = as_motion_field(teacher_fields[1], name="teacher field 1", dtype=dtype)
    occ = as_occlusion_map(occlusion, dtype=dtype)
    for name, t in (("frame1", frame1), ("teacher field 0", m0), ("teacher field 1", m1), ("occlusion", occ)):
        require_same_spatial(frame0, t, names=f"teacher_reconstruction_loss frame0/{name}")

    blended = occ * backward_warp(frame0, m0) + (dtype.type(1) - occ) * backward_warp(frame1, m1)
    return reconstruction_loss(blended, truth)


def resize_field(field: MotionField, height: int, width: int) -> MotionField:
    """Bilinear resize with displacements rescaled to the new grid."""

    field = as_motion_field(field)
    h, w = field.shape[:2]
    out = resize_bilinear(field, height, width)
    scale = np.array([width / w, height / h], dtype=np.float64)
    return (out.astype(np.float64) * scale).astype(field.dtype)


def distillation_loss(
    trace: Sequence[tuple[MotionField, MotionField]],
    teacher_fields: tuple[MotionField, MotionField],
    config: LossConfig,
) -> float:
    """Weighted sum over trace levels of the per-field MSE against the teacher.

    Per field the squared error is averaged over pixels and both components;
    the two fields are summed.
    """

    if not trace:
        raise ConfigurationError("distillation_loss: trace is empty")
    if len(trace) != len(config.distill_level_weights):
        raise ConfigurationError(
            f"distillation_loss: {len(trace)} trace levels but "
            f"{len(config.distill_level_weights)} level weights"
        )

    teacher = [as_motion_field(f, name="teacher field") for f in teacher_fields]
    total = 0.0
    for weight, pair in zip(config.distill_level_weights, trace):
        for student, tf in zip(pair, teacher):
            student = as_motion_field(student, name="trace field")
            h, w = student.shape[:2]
            ref = tf if tf.shape[:2] == (h, w) else resize_field(tf, h, w)
            diff = student.astype(np.float64) - ref.astype(np.float64)
            total += weight * float(np.mean(diff * diff))
    return total


def total_loss(l_rec: float, l_tea: float, l_distill: float, config: LossConfig) -> float:
    return float(l_rec) + config.lambda1 * float(l_tea) + config.lambda2 * float(l_distill)


def psnr(predicted: Tensor3, truth: Tensor3, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""

    a, b = _pair(predicted, truth, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
