"""Central finite-difference verification of analytic adjoints."""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Final

import numpy as np

from src.core.errors import VerificationFailure
from src.core.logging import get_logger

ABSOLUTE_FLOOR: Final[float] = 1e-8

Forward = Callable[..., Any]
Adjoint = Callable[..., Sequence[Any]]


@dataclass(frozen=True, slots=True)
class DifferentiableOp:
    """An operation paired with its adjoint.

    ``forward(*inputs)`` returns an array; ``adjoint(*inputs, grad_out)``
    returns one cotangent per input (arrays or scalars).
    """

    name: str
    forward: Forward
    adjoint: Adjoint


def _as_f64(values: Sequence[Any]) -> list[np.ndarray]:
    return [np.array(v, dtype=np.float64, copy=True) for v in values]


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABSOLUTE_FLOOR)
    return np.abs(analytic - numeric) / denom


def numerical_gradient(
    forward: Forward,
    inputs: Sequence[np.ndarray],
    grad_out: np.ndarray,
    index: int,
    epsilon: float,
) -> np.ndarray:
    """d<grad_out, forward(inputs)>/d inputs[index] by central differences.

    Outputs are differenced element-wise before the contraction so outputs
    untouched by a perturbation cancel exactly.
    """

    x = inputs[index]
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        plus = np.asarray(forward(*inputs), dtype=np.float64)
        flat[i] = orig - epsilon
        minus = np.asarray(forward(*inputs), dtype=np.float64)
        flat[i] = orig
        gflat[i] = float(np.sum(grad_out * (plus - minus))) / (2.0 * epsilon)
    return grad


def finite_diff_check(
    op: DifferentiableOp,
    inputs: Sequence[Any],
    epsilon: float = 1e-4,
    *,
    wrt: Sequence[int] | None = None,
    seed: int = 0,
    grad_out: np.ndarray | None = None,
) -> float:
    """Maximum element-wise relative error between adjoint and finite differences.

    Runs in float64. The scalar objective is ``<g, op(inputs)>`` for a random
    cotangent ``g`` (seeded) unless ``grad_out`` is given. Errors use the
    denominator ``max(|analytic|, |numeric|, 1e-8)``.
    """

    logger = get_logger("dqbc.core")
    xs = _as_f64(inputs)
    out = np.asarray(op.forward(*xs), dtype=np.float64)
    if grad_out is None:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(out.shape)
    else:
        g = np.asarray(grad_out, dtype=np.float64).reshape(out.shape)

    analytic_all = op.adjoint(*xs, g)
    indices = list(range(len(xs))) if wrt is None else list(wrt)

    worst = 0.0
    for idx in indices:
        analytic = np.asarray(analytic_all[idx], dtype=np.float64).reshape(xs[idx].shape)
        if not np.isfinite(analytic).all():
            raise VerificationFailure(f"{op.name}: non-finite analytic gradient for input {idx}")
        numeric = numerical_gradient(op.forward, xs, g, idx, epsilon)
        if not np.isfinite(numeric).all():
            raise VerificationFailure(f"{op.name}: non-finite numerical gradient for input {idx}")
        err = float(_relative_errors(analytic, numeric).max(initial=0.0))
        logger.debug("gradcheck %s input %d: max relative error %.3e", op.name, idx, err)
        worst = max(worst, err)
    return worst
