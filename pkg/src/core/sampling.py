"""Bilinear sampling, backward warping and fractional translation.

Out-of-bounds neighbours contribute 0 (``OUT_OF_BOUNDS_POLICY``). At exact
integer coordinates the derivative takes the right-continuous branch, which
is what ``floor`` gives for free.
"""
from __future__ import annotations

import math
from typing import Final

import numpy as np

from src.core.errors import ConfigurationError
from src.core.parallel import run_row_parallel
from src.core.tensor import (
    MotionField,
    Tensor3,
    as_motion_field,
    as_tensor3,
    require_finite,
    require_same_spatial,
)

OUT_OF_BOUNDS_POLICY: Final[str] = "zeros"


def bilinear_sample(src: Tensor3, x: float, y: float, c: int) -> float:
    """Scalar 4-neighbour bilinear interpolation of channel ``c`` at (x, y)."""

    h, w = src.shape[0], src.shape[1]
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = x - x0
    fy = y - y0

    def at(yy: int, xx: int) -> float:
        if 0 <= xx < w and 0 <= yy < h:
            return float(src[yy, xx, c])
        return 0.0

    return (
        (1 - fx) * (1 - fy) * at(y0, x0)
        + fx * (1 - fy) * at(y0, x0 + 1)
        + (1 - fx) * fy * at(y0 + 1, x0)
        + fx * fy * at(y0 + 1, x0 + 1)
    )


def _corners(xs: np.ndarray, ys: np.ndarray):
    x0f = np.floor(xs)
    y0f = np.floor(ys)
    fx = xs - x0f
    fy = ys - y0f
    return x0f.astype(np.intp), y0f.astype(np.intp), fx, fy


def _gather(src: np.ndarray, yi: np.ndarray, xi: np.ndarray, per_channel: bool) -> np.ndarray:
    h, w, c = src.shape
    valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    xc = np.clip(xi, 0, w - 1)
    yc = np.clip(yi, 0, h - 1)
    if per_channel:
        vals = src[yc, xc, np.arange(c)]
        return np.where(valid, vals, src.dtype.type(0))
    vals = src[yc, xc]
    return np.where(valid[..., None], vals, src.dtype.type(0))


def _check_coords(src: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> bool:
    if xs.shape != ys.shape:
        raise ConfigurationError(f"sample coordinates differ in shape: {xs.shape} vs {ys.shape}")
    if xs.ndim == 3:
        if xs.shape[2] != src.shape[2]:
            raise ConfigurationError(
                f"per-channel coordinates need {src.shape[2]} channels, got {xs.shape[2]}"
            )
        return True
    if xs.ndim != 2:
        raise ConfigurationError(f"sample coordinates must be rank 2 or 3, got {xs.shape}")
    return False


def sample_bilinear(src: Tensor3, xs: np.ndarray, ys: np.ndarray) -> Tensor3:
    """Vectorised ``bilinear_sample`` over a coordinate grid.

    ``xs``/``ys`` of shape (h, w) sample every channel at the same point;
    shape (h, w, C) gives each channel its own coordinates.
    """

    src = as_tensor3(src, name="sample source")
    per_channel = _check_coords(src, xs, ys)
    dtype = src.dtype
    xs = xs.astype(dtype, copy=False)
    ys = ys.astype(dtype, copy=False)
    out = np.empty(xs.shape[:2] + (src.shape[2],), dtype=dtype)
    one = dtype.type(1)

    def _fill(r0: int, r1: int) -> None:
        x0, y0, fx, fy = _corners(xs[r0:r1], ys[r0:r1])
        if not per_channel:
            fx = fx[..., None]
            fy = fy[..., None]
        v00 = _gather(src, y0, x0, per_channel)
        v01 = _gather(src, y0, x0 + 1, per_channel)
        v10 = _gather(src, y0 + 1, x0, per_channel)
        v11 = _gather(src, y0 + 1, x0 + 1, per_channel)
        out[r0:r1] = (
            (one - fx) * (one - fy) * v00
            + fx * (one - fy) * v01
            + (one - fx) * fy * v10
            + fx * fy * v11
        )

    run_row_parallel(_fill, xs.shape[0])
    return out


def _scatter_add(grad_src: np.ndarray, yi, xi, vals, per_channel: bool) -> None:
    h, w, c = grad_src.shape
    valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    if per_channel:
        ci = np.broadcast_to(np.arange(c), xi.shape)
        np.add.at(grad_src, (yi[valid], xi[valid], ci[valid]), vals[valid])
    else:
        np.add.at(grad_src, (yi[valid], xi[valid]), vals[valid])


def sample_bilinear_adjoint(
    src: Tensor3,
    xs: np.ndarray,
    ys: np.ndarray,
    grad_out: Tensor3,
    *,
    need_source: bool = True,
) -> tuple[Tensor3 | None, np.ndarray, np.ndarray]:
    """Cotangents of ``sample_bilinear`` for the source and both coordinates.

    Coordinate cotangents have the shape of ``xs`` (summed over channels when
    the coordinates are shared by all channels).
    """

    src = as_tensor3(src, name="sample source")
    per_channel = _check_coords(src, xs, ys)
    dtype = src.dtype
    g = np.asarray(grad_out, dtype=dtype)
    x0, y0, fx, fy = _corners(xs.astype(dtype, copy=False), ys.astype(dtype, copy=False))
    one = dtype.type(1)
    fxb = fx if per_channel else fx[..., None]
    fyb = fy if per_channel else fy[..., None]

    v00 = _gather(src, y0, x0, per_channel)
    v01 = _gather(src, y0, x0 + 1, per_channel)
    v10 = _gather(src, y0 + 1, x0, per_channel)
    v11 = _gather(src, y0 + 1, x0 + 1, per_channel)

    dx = g * ((one - fyb) * (v01 - v00) + fyb * (v11 - v10))
    dy = g * ((one - fxb) * (v10 - v00) + fxb * (v11 - v01))
    if not per_channel:
        dx = dx.sum(axis=-1)
        dy = dy.sum(axis=-1)

    grad_src = None
    if need_source:
        grad_src = np.zeros_like(src)
        taps = (
            (y0, x0, (one - fxb) * (one - fyb)),
            (y0, x0 + 1, fxb * (one - fyb)),
            (y0 + 1, x0, (one - fxb) * fyb),
            (y0 + 1, x0 + 1, fxb * fyb),
        )
        for yi, xi, wt in taps:
            _scatter_add(grad_src, yi, xi, wt * g, per_channel)
    return grad_src, dx, dy


def _warp_coords(flow: MotionField) -> tuple[np.ndarray, np.ndarray]:
    h, w, _ = flow.shape
    xs = np.arange(w, dtype=flow.dtype)[None, :] + flow[:, :, 0]
    ys = np.arange(h, dtype=flow.dtype)[:, None] + flow[:, :, 1]
    return xs, ys


def backward_warp(source: Tensor3, flow: MotionField) -> Tensor3:
    """``out(y, x) = source(x + flow_h(y, x), y + flow_v(y, x))``."""

    source = require_finite(as_tensor3(source, name="warp source"), name="warp source")
    flow = as_motion_field(flow, dtype=source.dtype)
    require_same_spatial(source, flow, names="backward_warp source/flow")
    xs, ys = _warp_coords(flow)
    return sample_bilinear(source, xs, ys)


def backward_warp_adjoint(
    source: Tensor3,
    flow: MotionField,
    grad_out: Tensor3,
    *,
    need_source: bool = True,
) -> tuple[Tensor3 | None, MotionField]:
    """Cotangents (source, flow) of ``backward_warp`` given output cotangents."""

    source = as_tensor3(source, name="warp source")
    flow = as_motion_field(flow, dtype=source.dtype)
    require_same_spatial(source, flow, names="backward_warp source/flow")
    xs, ys = _warp_coords(flow)
    grad_src, gx, gy = sample_bilinear_adjoint(
        source, xs, ys, grad_out, need_source=need_source
    )
    return grad_src, np.stack([gx, gy], axis=-1)


def _translate_coords(shape: tuple[int, ...], dtype: np.dtype, dx: float, dy: float):
    h, w = shape[0], shape[1]
    xs = np.broadcast_to(np.arange(w, dtype=dtype)[None, :] - dtype.type(dx), (h, w))
    ys = np.broadcast_to(np.arange(h, dtype=dtype)[:, None] - dtype.type(dy), (h, w))
    return xs, ys


def translate_fractional(x: Tensor3, dx: float, dy: float) -> Tensor3:
    """Shift the whole map by (dx, dy): ``out(p) = x(p - (dx, dy))``, zero fill."""

    x = require_finite(as_tensor3(x, name="translate input"), name="translate input")
    xs, ys = _translate_coords(x.shape, x.dtype, float(dx), float(dy))
    return sample_bilinear(x, xs, ys)


def translate_fractional_adjoint(
    x: Tensor3, dx: float, dy: float, grad_out: Tensor3
) -> tuple[Tensor3, float, float]:
    """Cotangents (input, dx, dy) of ``translate_fractional``."""

    x = as_tensor3(x, name="translate input")
    xs, ys = _translate_coords(x.shape, x.dtype, float(dx), float(dy))
    grad_x, gxs, gys = sample_bilinear_adjoint(x, xs, ys, grad_out)
    # The sample point moves by -dx / -dy.
    return grad_x, -float(gxs.sum()), -float(gys.sum())
