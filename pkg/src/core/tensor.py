"""Rank-3 tensor carriers and boundary checks.

Every image, feature map, motion field and weight map is a ``numpy.ndarray``
of shape ``(height, width, channels)`` in row-major ``(y, x, c)`` order.
float32 is the pipeline precision, float64 the verification precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Final, TypeAlias

import numpy as np

from src.core.errors import ConfigurationError, ContractViolation, DataError

Tensor3: TypeAlias = np.ndarray
MotionField: TypeAlias = np.ndarray
OcclusionMap: TypeAlias = np.ndarray

PRECISIONS: Final[dict[str, np.dtype]] = {
    "float32": np.dtype(np.float32),
    "float64": np.dtype(np.float64),
}


def resolve_dtype(precision: str | np.dtype | type) -> np.dtype:
    """Map a precision flag ("float32" / "float64") to a numpy dtype."""

    if isinstance(precision, str):
        key = precision.strip().lower()
        if key not in PRECISIONS:
            raise ConfigurationError(
                f"unknown precision {precision!r}; expected one of {sorted(PRECISIONS)}"
            )
        return PRECISIONS[key]
    dt = np.dtype(precision)
    if dt not in PRECISIONS.values():
        raise ConfigurationError(f"unsupported dtype {dt}")
    return dt


def as_tensor3(x: Any, *, name: str = "tensor", dtype: np.dtype | None = None) -> Tensor3:
    """Return ``x`` as a float rank-3 array, validating its shape."""

    arr = np.asarray(x)
    if arr.ndim != 3:
        raise ConfigurationError(f"{name}: expected rank-3 (H, W, C), got shape {arr.shape}")
    if min(arr.shape) <= 0:
        raise ConfigurationError(f"{name}: every dimension must be positive, got {arr.shape}")
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in PRECISIONS.values():
        arr = arr.astype(np.float32)
    return arr


def require_finite(x: np.ndarray, *, name: str = "tensor") -> np.ndarray:
    if not np.isfinite(x).all():
        raise DataError(f"{name}: contains non-finite values")
    return x


def require_channels(x: np.ndarray, channels: int, *, name: str = "tensor") -> np.ndarray:
    if x.shape[2] != channels:
        raise ConfigurationError(f"{name}: expected {channels} channels, got {x.shape[2]}")
    return x


def require_same_spatial(a: np.ndarray, b: np.ndarray, *, names: str = "operands") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ConfigurationError(
            f"{names}: spatial size mismatch {a.shape[:2]} vs {b.shape[:2]}"
        )


def require_multiple(x: np.ndarray, multiple: int, *, name: str = "tensor") -> None:
    h, w = x.shape[:2]
    if h % multiple or w % multiple:
        raise ContractViolation(
            f"{name}: spatial size {h}x{w} is not a multiple of {multiple}"
        )


def as_motion_field(x: Any, *, name: str = "flow", dtype: np.dtype | None = None) -> MotionField:
    arr = as_tensor3(x, name=name, dtype=dtype)
    require_channels(arr, 2, name=name)
    return require_finite(arr, name=name)


def as_occlusion_map(x: Any, *, name: str = "occlusion", dtype: np.dtype | None = None) -> OcclusionMap:
    arr = as_tensor3(x, name=name, dtype=dtype)
    require_channels(arr, 1, name=name)
    require_finite(arr, name=name)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigurationError(f"{name}: values must lie in [0, 1]")
    return arr


@dataclass(frozen=True, slots=True)
class ConvSpec:
    """One convolution layer: kernel (out, in, kH, kW), bias (out,)."""

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        if self.kernel.ndim != 4:
            raise ConfigurationError(f"conv kernel must be rank-4, got {self.kernel.shape}")
        out_c, _in_c, kh, kw = self.kernel.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ConfigurationError(f"conv kernel must be odd-sized, got {kh}x{kw}")
        if self.bias.shape != (out_c,):
            raise ConfigurationError(
                f"conv bias must have shape ({out_c},), got {self.bias.shape}"
            )
        if self.stride < 1:
            raise ConfigurationError(f"conv stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ConfigurationError(f"conv padding must be non-negative, got {self.padding}")

    @classmethod
    def same(cls, kernel: np.ndarray, bias: np.ndarray, *, stride: int = 1) -> "ConvSpec":
        """Padding (k - 1) / 2, so stride-1 convs preserve spatial size."""
        return cls(
            kernel=np.asarray(kernel),
            bias=np.asarray(bias),
            stride=int(stride),
            padding=(int(np.shape(kernel)[2]) - 1) // 2,
        )

    @property
    def out_channels(self) -> int:
        return int(self.kernel.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.kernel.shape[1])

    @property
    def kernel_size(self) -> tuple[int, int]:
        return int(self.kernel.shape[2]), int(self.kernel.shape[3])
