"""DQBW single-file weight archive.

Layout::

    b"DQBW" | u32 LE version (1) | u64 LE header length | UTF-8 JSON header | payload

The header maps tensor names (in archive order) to
``{"shape": [...], "dtype": "f32le", "offset": <payload byte offset>}``.
The payload is contiguous little-endian float32 data.
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Final

import numpy as np

from src.core.errors import ArchiveFormatError, ArchiveValidationError
from src.core.logging import get_logger
from src.utils.helpers import ensure_parent_dir

MAGIC: Final[bytes] = b"DQBW"
VERSION: Final[int] = 1
DTYPE_TAG: Final[str] = "f32le"
_PREFIX = struct.Struct("<4sIQ")
_ITEM = np.dtype("<f4")


@dataclass(slots=True)
class WeightArchive:
    """Ordered name -> float32 tensor map."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, name: object) -> bool:
        return name in self.tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    def add(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = np.ascontiguousarray(value, dtype=np.float32)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: tuple(int(d) for d in v.shape) for k, v in self.tensors.items()}

    @property
    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.tensors.values()))


def _header_and_payload(archive: WeightArchive) -> tuple[bytes, bytes]:
    header: dict[str, Any] = {}
    chunks: list[bytes] = []
    offset = 0
    for name, value in archive.tensors.items():
        data = np.ascontiguousarray(value, dtype=_ITEM).tobytes()
        header[name] = {"shape": [int(d) for d in value.shape], "dtype": DTYPE_TAG, "offset": offset}
        chunks.append(data)
        offset += len(data)
    text = json.dumps(header, separators=(",", ":"), ensure_ascii=False)
    return text.encode("utf-8"), b"".join(chunks)


def archive_to_bytes(archive: WeightArchive) -> bytes:
    header, payload = _header_and_payload(archive)
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + payload


def payload_sha256(archive: WeightArchive) -> str:
    """Hex SHA-256 of the raw payload bytes (the golden-checksum input)."""
    _header, payload = _header_and_payload(archive)
    return hashlib.sha256(payload).hexdigest()


def _parse_entry(name: str, entry: Any) -> tuple[tuple[int, ...], int]:
    if not isinstance(entry, dict):
        raise ArchiveFormatError(f"header entry {name!r} is not an object")
    shape = entry.get("shape")
    offset = entry.get("offset")
    if entry.get("dtype") != DTYPE_TAG:
        raise ArchiveFormatError(f"tensor {name!r}: unsupported dtype {entry.get('dtype')!r}")
    if not isinstance(shape, list) or not all(
        isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in shape
    ):
        raise ArchiveFormatError(f"tensor {name!r}: invalid shape {shape!r}")
    if not isinstance(offset, int) or isinstance(offset, bool) or offset < 0:
        raise ArchiveFormatError(f"tensor {name!r}: invalid offset {offset!r}")
    return tuple(shape), offset


def archive_from_bytes(blob: bytes) -> WeightArchive:
    """Parse an archive; bad magic, version, header or offsets raise ArchiveFormatError."""

    if len(blob) < _PREFIX.size:
        raise ArchiveFormatError("archive truncated before the header")
    magic, version, header_len = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ArchiveFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported archive version {version}")
    start = _PREFIX.size
    if header_len > len(blob) - start:
        raise ArchiveFormatError("header length exceeds file size")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as ex:
        raise ArchiveFormatError(f"unreadable archive header: {ex}") from ex
    if not isinstance(header, dict):
        raise ArchiveFormatError("archive header must be a JSON object")

    payload = memoryview(blob)[start + header_len :]
    spans: list[tuple[int, int, str]] = []
    archive = WeightArchive()
    for name, entry in header.items():
        shape, offset = _parse_entry(name, entry)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + count * _ITEM.itemsize
        if end > len(payload):
            raise ArchiveFormatError(
                f"tensor {name!r}: offset out of bounds ({end} > payload {len(payload)})"
            )
        spans.append((offset, end, name))
        data = np.frombuffer(payload, dtype=_ITEM, count=count, offset=offset)
        archive.tensors[name] = data.astype(np.float32).reshape(shape)

    spans.sort()
    for (_s0, e0, n0), (s1, _e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise ArchiveFormatError(f"tensors {n0!r} and {n1!r} overlap in the payload")
    return archive


def save_archive(archive: WeightArchive, path: str | Path) -> Path:
    path = ensure_parent_dir(Path(path))
    path.write_bytes(archive_to_bytes(archive))
    get_logger("dqbc.archive").info("wrote %d tensors to %s", len(archive), path)
    return path


def load_archive(path: str | Path) -> WeightArchive:
    path = Path(path)
    blob = path.read_bytes()
    archive = archive_from_bytes(blob)
    get_logger("dqbc.archive").debug("loaded %d tensors from %s", len(archive), path)
    return archive


def validate_archive(
    archive: WeightArchive, required: Iterable[tuple[str, tuple[int, ...]]] | Mapping[str, tuple[int, ...]]
) -> None:
    """Raise ArchiveValidationError naming every missing or mis-shaped tensor."""

    items = required.items() if isinstance(required, Mapping) else required
    missing: list[str] = []
    wrong: list[str] = []
    for name, shape in items:
        if name not in archive.tensors:
            missing.append(name)
        elif tuple(archive.tensors[name].shape) != tuple(shape):
            wrong.append(name)
    if missing or wrong:
        parts = []
        if missing:
            parts.append(f"{len(missing)} missing")
        if wrong:
            parts.append(f"{len(wrong)} with wrong shape")
        raise ArchiveValidationError("weight archive invalid: " + ", ".join(parts), missing + wrong)
