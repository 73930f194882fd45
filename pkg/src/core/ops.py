"""Convolution, pooling, activations and resizing on ``(H, W, C)`` tensors."""
from __future__ import annotations

from typing import Final

import numpy as np

from src.core.errors import ConfigurationError, ContractViolation
from src.core.parallel import run_row_parallel
from src.core.tensor import ConvSpec, Tensor3, as_tensor3, require_finite

LEAKY_SLOPE: Final[float] = 0.1


def conv2d(x: Tensor3, spec: ConvSpec) -> Tensor3:
    """2-D cross-correlation with zero padding.

    Each output element accumulates ``kernel * input`` over (c, ky, kx) in that
    fixed order and then adds the bias.
    """

    x = require_finite(as_tensor3(x, name="conv2d input"), name="conv2d input")
    h, w, c_in = x.shape
    if spec.in_channels != c_in:
        raise ConfigurationError(
            f"conv2d: kernel expects {spec.in_channels} input channels, got {c_in}"
        )

    kh, kw = spec.kernel_size
    s, p = spec.stride, spec.padding
    h_out = (h + 2 * p - kh) // s + 1
    w_out = (w + 2 * p - kw) // s + 1
    if h_out <= 0 or w_out <= 0:
        raise ConfigurationError(f"conv2d: input {h}x{w} too small for kernel {kh}x{kw}")

    dtype = x.dtype
    xp = np.pad(x, ((p, p), (p, p), (0, 0))) if p else x
    # (c, ky, kx, out) so every tap is a contiguous out-channel vector.
    taps = np.ascontiguousarray(spec.kernel.astype(dtype, copy=False).transpose(1, 2, 3, 0))
    bias = spec.bias.astype(dtype, copy=False)
    out = np.empty((h_out, w_out, spec.out_channels), dtype=dtype)
    col_stop = s * (w_out - 1) + 1

    def _fill(r0: int, r1: int) -> None:
        acc = np.zeros((r1 - r0, w_out, spec.out_channels), dtype=dtype)
        row_stop = s * (r1 - 1 - r0) + 1
        for c in range(c_in):
            plane = xp[:, :, c]
            for ky in range(kh):
                rows = plane[r0 * s + ky : r0 * s + ky + row_stop : s]
                for kx in range(kw):
                    window = rows[:, kx : kx + col_stop : s]
                    acc += window[:, :, None] * taps[c, ky, kx]
        out[r0:r1] = acc + bias

    run_row_parallel(_fill, h_out)
    return out


def avgpool2x(x: Tensor3) -> Tensor3:
    """Mean of every 2x2 block; output is H/2 x W/2 x C."""

    x = as_tensor3(x, name="avgpool2x input")
    h, w, _ = x.shape
    if h % 2 or w % 2:
        raise ContractViolation(f"avgpool2x: dimensions must be even, got {h}x{w}")
    total = x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2]
    return total * x.dtype.type(0.25)


def avgpool2x_adjoint(grad: Tensor3) -> Tensor3:
    """Cotangent of ``avgpool2x``: each coarse value spreads 1/4 to its block."""

    grad = as_tensor3(grad, name="avgpool2x cotangent")
    up = np.repeat(np.repeat(grad, 2, axis=0), 2, axis=1)
    return up * grad.dtype.type(0.25)


def upsample2x_nearest(x: Tensor3) -> Tensor3:
    x = as_tensor3(x, name="upsample input")
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x >= 0, x, x * x.dtype.type(slope))


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form stays inside [0, 1] for any finite input.
    half = x.dtype.type(0.5)
    return half * (np.tanh(x * half) + x.dtype.type(1.0))


def softmax_groups(x: Tensor3, group_size: int) -> Tensor3:
    """Softmax over each consecutive channel group of ``group_size``."""

    x = as_tensor3(x, name="softmax input")
    h, w, c = x.shape
    if group_size <= 0 or c % group_size:
        raise ConfigurationError(
            f"softmax_groups: {c} channels not divisible by group size {group_size}"
        )
    g = x.reshape(h, w, c // group_size, group_size)
    shifted = g - g.max(axis=-1, keepdims=True)
    with np.errstate(under="ignore"):
        e = np.exp(shifted)
    return (e / e.sum(axis=-1, keepdims=True)).reshape(h, w, c)


def softmax_groups_adjoint(probs: Tensor3, grad: Tensor3, group_size: int) -> Tensor3:
    """Cotangent of the logits given the softmax output and its cotangent."""

    h, w, c = probs.shape
    p = probs.reshape(h, w, c // group_size, group_size)
    g = grad.reshape(h, w, c // group_size, group_size)
    inner = (p * g).sum(axis=-1, keepdims=True)
    return (p * (g - inner)).reshape(h, w, c)


def pad_reflect_to_multiple(x: Tensor3, multiple: int = 8) -> tuple[Tensor3, tuple[int, int]]:
    """Reflect-pad bottom/right edges up to the next multiple.

    Returns the padded tensor and the original (height, width) for cropping.
    """

    x = as_tensor3(x, name="pad input")
    h, w, _ = x.shape
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return x, (h, w)
    mode = "reflect" if h > 1 and w > 1 else "edge"
    return np.pad(x, ((0, pad_h), (0, pad_w), (0, 0)), mode=mode), (h, w)


def crop(x: Tensor3, height: int, width: int) -> Tensor3:
    if x.shape[0] < height or x.shape[1] < width:
        raise ContractViolation(
            f"crop: cannot crop {x.shape[0]}x{x.shape[1]} to {height}x{width}"
        )
    return x[:height, :width]


def _resize_axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel centres, clamped at the borders.
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(x: Tensor3, height: int, width: int) -> Tensor3:
    """Separable bilinear resize with half-pixel alignment and edge clamping."""

    x = as_tensor3(x, name="resize input")
    if height <= 0 or width <= 0:
        raise ConfigurationError(f"resize_bilinear: invalid target {height}x{width}")
    h, w, _ = x.shape
    if (h, w) == (height, width):
        return x.copy()
    y0, y1, fy = _resize_axis_weights(h, height)
    x0, x1, fx = _resize_axis_weights(w, width)
    fy = fy.astype(x.dtype)[:, None, None]
    fx = fx.astype(x.dtype)[None, :, None]
    rows = x[y0] * (1 - fy) + x[y1] * fy
    return rows[:, x0] * (1 - fx) + rows[:, x1] * fx
