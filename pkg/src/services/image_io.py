"""8-bit image load/save through Pillow."""
from __future__ import annotations

from pathlib import Path
from typing import Final

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.core.errors import ImageIOError
from src.core.tensor import Tensor3, as_tensor3
from src.utils.helpers import ensure_parent_dir

# Modes that hold 8-bit samples and convert losslessly to RGB.
_EIGHT_BIT_MODES: Final[frozenset[str]] = frozenset({"RGB", "RGBA", "L", "LA", "P", "1"})


def load_image(path: str | Path, *, dtype: np.dtype | type = np.float32) -> Tensor3:
    """Read an 8-bit image as (H, W, 3) with each byte ``v`` mapped to ``v / 255``."""

    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode not in _EIGHT_BIT_MODES:
                raise ImageIOError(f"{path}: unsupported image mode {img.mode!r} (need 8-bit)")
            rgb = img if img.mode == "RGB" else img.convert("RGB")
            data = np.asarray(rgb, dtype=np.uint8)
    except FileNotFoundError as ex:
        raise ImageIOError(f"image not found: {path}") from ex
    except UnidentifiedImageError as ex:
        raise ImageIOError(f"{path}: not a readable image") from ex
    return (data.astype(np.float64) / 255.0).astype(dtype)


def to_bytes(image: np.ndarray) -> np.ndarray:
    """``floor(clamp(r, 0, 1) * 255 + 0.5)`` as uint8 (round half up)."""
    clipped = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


def save_image(image: Tensor3, path: str | Path) -> Path:
    """Write a 3-channel image in [0, 1] (values outside are clamped)."""

    image = as_tensor3(image, name="image")
    if image.shape[2] != 3:
        raise ImageIOError(f"save_image expects 3 channels, got {image.shape[2]}")
    path = ensure_parent_dir(path)
    try:
        Image.fromarray(to_bytes(image)).save(path)
    except (KeyError, ValueError) as ex:
        # Pillow raises these for unknown extensions.
        raise ImageIOError(f"{path}: cannot save image ({ex})") from ex
    return path


def save_grayscale(image: Tensor3, path: str | Path) -> Path:
    """Write a single-channel map in [0, 1] as an 8-bit grayscale image."""

    image = as_tensor3(image, name="grayscale image")
    if image.shape[2] != 1:
        raise ImageIOError(f"save_grayscale expects 1 channel, got {image.shape[2]}")
    path = ensure_parent_dir(path)
    try:
        Image.fromarray(to_bytes(image[:, :, 0])).save(path)
    except (KeyError, ValueError) as ex:
        raise ImageIOError(f"{path}: cannot save image ({ex})") from ex
    return path
