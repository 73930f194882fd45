"""Colour-wheel rendering of motion fields.

Hue encodes direction, saturation encodes magnitude normalised by the
largest vector in the image.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Final

import numpy as np

from src.core.tensor import MotionField, Tensor3, as_motion_field

# Steps between the primary/secondary colours, chosen for perceptual spacing.
_SEGMENTS: Final[tuple[int, ...]] = (15, 6, 4, 11, 13, 6)
_EPS: Final[float] = 1e-5


@lru_cache(maxsize=1)
def color_wheel() -> np.ndarray:
    """(55, 3) RGB wheel: red, yellow, green, cyan, blue, magenta, back to red."""

    ry, yg, gc, cb, bm, mr = _SEGMENTS
    wheel = np.zeros((sum(_SEGMENTS), 3), dtype=np.float64)

    i, j = 0, ry
    wheel[i:j, 0] = 1.0
    wheel[i:j, 1] = np.arange(ry) / ry

    i, j = j, j + yg
    wheel[i:j, 0] = 1.0 - np.arange(yg) / yg
    wheel[i:j, 1] = 1.0

    i, j = j, j + gc
    wheel[i:j, 1] = 1.0
    wheel[i:j, 2] = np.arange(gc) / gc

    i, j = j, j + cb
    wheel[i:j, 1] = 1.0 - np.arange(cb) / cb
    wheel[i:j, 2] = 1.0

    i, j = j, j + bm
    wheel[i:j, 0] = np.arange(bm) / bm
    wheel[i:j, 2] = 1.0

    i, j = j, j + mr
    wheel[i:j, 0] = 1.0
    wheel[i:j, 2] = 1.0 - np.arange(mr) / mr

    wheel.setflags(write=False)
    return wheel


def flow_to_rgb(field: MotionField, max_magnitude: float | None = None) -> Tensor3:
    """Render a motion field as an RGB image in [0, 1].

    Zero motion is white. ``max_magnitude`` defaults to the image's largest
    vector length.
    """

    field = as_motion_field(field).astype(np.float64)
    u, v = field[..., 0], field[..., 1]
    wheel = color_wheel()
    n = wheel.shape[0]

    angle = np.arctan2(-v, -u) / np.pi
    length = np.hypot(u, v)
    norm = max(float(length.max()) if max_magnitude is None else float(max_magnitude), _EPS)
    length = np.clip(length / norm, 0.0, 1.0)

    idx = (angle + 1.0) / 2.0 * (n - 1)
    idx0 = np.floor(idx).astype(np.intp)
    idx1 = idx0 + 1
    idx1[idx1 == n] = 0
    alpha = (idx - idx0)[..., None]
    rgb = (1.0 - alpha) * wheel[idx0] + alpha * wheel[idx1]

    rgb = 1.0 - length[..., None] * (1.0 - rgb)
    return rgb.astype(np.float32)
