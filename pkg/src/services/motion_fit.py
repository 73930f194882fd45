"""Direct optimisation of a full-resolution motion field through the warp adjoint.

Minimises ``mean((warp(frame0, M) - frame1) ** 2)`` over ``M`` starting from
zero. Gradients and per-channel Jacobians come from ``backward_warp_adjoint``.
Each iteration solves a damped Gauss-Newton system per pixel, summed over a
square window, for the motion that best explains the linearised residuals of
that window. The window shrinks over the run (radius 8, 4, 2, 1), so the
field first settles on the dominant motion and then sharpens.

Steps are accepted pixel by pixel. A pixel moves only if its own squared
error does not grow; the step is halved until it does, with the full window
estimate as a last try. The total loss therefore never increases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Final

import numpy as np

from src.core.errors import ConfigurationError, DivergenceError, InputValidationError
from src.core.logging import get_logger
from src.core.sampling import backward_warp, backward_warp_adjoint
from src.core.tensor import MotionField, Tensor3, as_tensor3

DEFAULT_ITERATIONS: Final[int] = 500
DEFAULT_STEP: Final[float] = 0.5
MAX_HALVINGS: Final[int] = 12
RELATIVE_DAMPING: Final[float] = 1e-3
CONVERGED_LOSS: Final[float] = 1e-12
WINDOW_RADII: Final[tuple[int, ...]] = (8, 4, 2, 1)


@dataclass(slots=True)
class FitResult:
    field: MotionField
    losses: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _pixel_errors(frame0: Tensor3, frame1: Tensor3, flow: MotionField) -> tuple[np.ndarray, np.ndarray]:
    residual = backward_warp(frame0, flow) - frame1
    return residual, (residual * residual).sum(axis=-1)


def _jacobians(frame0: Tensor3, flow: MotionField) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel d warp / d (flow_x, flow_y), each (h, w, C)."""
    h, w, c = frame0.shape
    jx = np.empty((h, w, c), dtype=frame0.dtype)
    jy = np.empty((h, w, c), dtype=frame0.dtype)
    for ch in range(c):
        unit = np.zeros_like(frame0)
        unit[:, :, ch] = 1.0
        _, grad = backward_warp_adjoint(frame0, flow, unit, need_source=False)
        jx[:, :, ch] = grad[:, :, 0]
        jy[:, :, ch] = grad[:, :, 1]
    return jx, jy


def _box_sum(x: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)^2 window around every pixel, zero outside the map."""
    if radius == 0:
        return x
    pad = ((radius + 1, radius), (radius + 1, radius)) + ((0, 0),) * (x.ndim - 2)
    c = np.pad(x, pad).cumsum(axis=0).cumsum(axis=1)
    k = 2 * radius + 1
    return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def _window_direction(
    frame0: Tensor3, flow: MotionField, residual: np.ndarray, radius: int
) -> MotionField:
    jx, jy = _jacobians(frame0, flow)
    _, grad = backward_warp_adjoint(frame0, flow, residual, need_source=False)
    fx, fy = flow[:, :, 0], flow[:, :, 1]
    a = (jx * jx).sum(axis=-1)
    b = (jx * jy).sum(axis=-1)
    d = (jy * jy).sum(axis=-1)
    # normal equations of r + J (m - f) = 0, so neighbours vote for a motion, not an increment
    rhs_x = a * fx + b * fy - grad[:, :, 0]
    rhs_y = b * fx + d * fy - grad[:, :, 1]
    sums = _box_sum(np.stack([a, b, d, rhs_x, rhs_y], axis=-1), radius)
    a, b, d, rhs_x, rhs_y = np.moveaxis(sums, -1, 0)

    lam = RELATIVE_DAMPING * 0.5 * (a + d) + 1e-12
    a = a + lam
    d = d + lam
    rhs_x = rhs_x + lam * fx
    rhs_y = rhs_y + lam * fy
    det = a * d - b * b
    target_x = (d * rhs_x - b * rhs_y) / det
    target_y = (a * rhs_y - b * rhs_x) / det
    return np.stack([target_x - fx, target_y - fy], axis=-1)


def _stage(it: int, iterations: int, floor: int) -> int:
    scheduled = it * len(WINDOW_RADII) // max(iterations, 1)
    return min(max(scheduled, floor), len(WINDOW_RADII) - 1)


def fit_motion(
    frame0: Tensor3,
    frame1: Tensor3,
    iterations: int = DEFAULT_ITERATIONS,
    step: float = DEFAULT_STEP,
) -> FitResult:
    """Fit ``M`` so that ``backward_warp(frame0, M)`` matches ``frame1``.

    ``losses[0]`` is the loss of the zero field; one entry is appended per
    iteration. Stops early once the loss falls below 1e-12, or when no pixel
    can improve at the smallest window.
    """

    logger = get_logger("dqbc.motion")
    f0 = as_tensor3(frame0, name="frame0", dtype=np.float64)
    f1 = as_tensor3(frame1, name="frame1", dtype=np.float64)
    if f0.shape != f1.shape:
        raise InputValidationError(f"frame sizes differ: {f0.shape} vs {f1.shape}")
    if iterations < 0:
        raise ConfigurationError(f"iterations must be >= 0, got {iterations}")
    if not math.isfinite(step) or step <= 0:
        raise ConfigurationError(f"step size must be positive, got {step}")

    h, w, _ = f0.shape
    flow = np.zeros((h, w, 2), dtype=np.float64)
    residual, errors = _pixel_errors(f0, f1, flow)
    n = float(f0.size)
    result = FitResult(field=flow, losses=[float(errors.sum()) / n])
    alphas = [step * 0.5**k for k in range(MAX_HALVINGS + 1)] + [1.0]
    floor = 0

    for it in range(iterations):
        if not math.isfinite(result.final_loss):
            raise DivergenceError(f"loss became {result.final_loss} at iteration {it}")
        if result.final_loss < CONVERGED_LOSS:
            break

        stage = _stage(it, iterations, floor)
        direction = _window_direction(f0, flow, residual, WINDOW_RADII[stage])
        if not np.isfinite(direction).all():
            raise DivergenceError(f"non-finite update at iteration {it + 1}")
        pending = np.ones((h, w), dtype=bool)
        improved_any = False
        for alpha in alphas:
            trial = np.where(pending[..., None], flow + alpha * direction, flow)
            trial_residual, trial_errors = _pixel_errors(f0, f1, trial)
            accept = pending & (trial_errors <= errors)
            if accept.any():
                improved_any |= bool((trial_errors[accept] < errors[accept]).any())
                flow = np.where(accept[..., None], trial, flow)
                residual = np.where(accept[..., None], trial_residual, residual)
                errors = np.where(accept, trial_errors, errors)
            pending &= ~accept
            if not pending.any():
                break

        loss = float(errors.sum()) / n
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at iteration {it + 1}")
        result.losses.append(loss)
        result.iterations = it + 1
        if not improved_any:
            if stage == len(WINDOW_RADII) - 1:
                break
            floor = stage + 1
            logger.debug("fit-motion: window radius %d settled at iteration %d", WINDOW_RADII[stage], it + 1)

    result.field = flow
    logger.info(
        "fit-motion: %d iterations, loss %.3e -> %.3e",
        result.iterations,
        result.initial_loss,
        result.final_loss,
    )
    return result


def mean_endpoint_error(
    flow: MotionField, truth: tuple[float, float], interior: float = 0.8
) -> float:
    """Mean Euclidean distance to a constant vector over the central ``interior`` crop."""

    flow = np.asarray(flow, dtype=np.float64)
    if not 0.0 < interior <= 1.0:
        raise ConfigurationError(f"interior fraction must lie in (0, 1], got {interior}")
    h, w = flow.shape[:2]
    my = int(round(h * (1.0 - interior) / 2.0))
    mx = int(round(w * (1.0 - interior) / 2.0))
    core = flow[my : h - my, mx : w - mx]
    diff = core - np.asarray(truth, dtype=np.float64)
    return float(np.mean(np.hypot(diff[..., 0], diff[..., 1])))
