"""Micro-benchmarks for the heavy kernels."""
from __future__ import annotations

import csv
import statistics
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Final, TextIO

import numpy as np

from src.core.errors import ConfigurationError
from src.core.ops import conv2d
from src.core.sampling import backward_warp
from src.core.tensor import ConvSpec
from src.services.correlation import PyramidConfig, build_key_pyramid, gather_unilateral_correlation
from src.services.motion import LOGIT_CHANNELS, convex_upsample

CSV_HEADER: Final[tuple[str, ...]] = (
    "op",
    "height",
    "width",
    "channels",
    "config",
    "median_ns",
    "throughput_elems_per_s",
)
BENCH_OPS: Final[tuple[str, ...]] = ("gather", "warp", "conv2d", "convex_upsample")
DEFAULT_SIZES: Final[tuple[tuple[int, int, int], ...]] = ((32, 32, 96),)


@dataclass(frozen=True, slots=True)
class BenchRow:
    op: str
    height: int
    width: int
    channels: int
    config: str
    median_ns: int
    throughput: float

    def as_csv(self) -> list[str]:
        return [
            self.op,
            str(self.height),
            str(self.width),
            str(self.channels),
            self.config,
            str(self.median_ns),
            f"{self.throughput:.6g}",
        ]


def parse_size(text: str) -> tuple[int, int, int]:
    """``HxWxC`` (or ``HxW``, channels default 96)."""
    parts = [p for p in str(text).lower().replace("*", "x").split("x") if p]
    try:
        values = [int(p) for p in parts]
    except ValueError as ex:
        raise ConfigurationError(f"bad size {text!r}; expected HxWxC") from ex
    if len(values) == 2:
        values.append(96)
    if len(values) != 3 or any(v <= 0 for v in values):
        raise ConfigurationError(f"bad size {text!r}; expected HxWxC")
    return values[0], values[1], values[2]


def _prepare(op: str, h: int, w: int, c: int, pyramid: PyramidConfig, rng: np.random.Generator):
    """Return (callable, config label, output element count)."""

    if op == "gather":
        q = rng.standard_normal((h, w, c)).astype(np.float32)
        keys = build_key_pyramid(rng.standard_normal((h, w, c)).astype(np.float32), pyramid)
        label = f"L{pyramid.levels}r{'-'.join(str(r) for r in pyramid.radii)}"
        return (lambda: gather_unilateral_correlation(q, keys, pyramid)), label, h * w * pyramid.channels_per_direction
    if op == "warp":
        src = rng.standard_normal((h, w, c)).astype(np.float32)
        flow = rng.uniform(-4.0, 4.0, (h, w, 2)).astype(np.float32)
        return (lambda: backward_warp(src, flow)), "bilinear-zeros", h * w * c
    if op == "conv2d":
        x = rng.standard_normal((h, w, c)).astype(np.float32)
        spec = ConvSpec.same(
            rng.standard_normal((c, c, 3, 3)).astype(np.float32), np.zeros(c, dtype=np.float32)
        )
        return (lambda: conv2d(x, spec)), "k3s1", h * w * c
    if op == "convex_upsample":
        field = rng.standard_normal((h, w, 2)).astype(np.float32)
        logits = rng.standard_normal((h, w, LOGIT_CHANNELS)).astype(np.float32)
        return (lambda: convex_upsample(field, logits)), "x2", 4 * h * w * 2
    raise ConfigurationError(f"unknown bench op {op!r}; expected one of {', '.join(BENCH_OPS)}")


def time_call(fn: Callable[[], object], repetitions: int) -> int:
    """Median wall time in nanoseconds."""
    samples = []
    for _ in range(max(1, int(repetitions))):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return int(statistics.median(samples))


def run_bench(
    ops: Sequence[str],
    sizes: Iterable[tuple[int, int, int]] = DEFAULT_SIZES,
    repetitions: int = 5,
    pyramid: PyramidConfig | None = None,
    seed: int = 0,
) -> list[BenchRow]:
    pyramid = pyramid or PyramidConfig()
    unknown = [op for op in ops if op not in BENCH_OPS]
    if unknown:
        raise ConfigurationError(f"unknown bench op(s): {', '.join(unknown)}")
    rng = np.random.default_rng(seed)
    rows: list[BenchRow] = []
    for h, w, c in sizes:
        for op in ops:
            fn, label, elems = _prepare(op, h, w, c, pyramid, rng)
            median = time_call(fn, repetitions)
            throughput = elems / (median * 1e-9) if median > 0 else float("inf")
            rows.append(BenchRow(op, h, w, c, label, median, throughput))
    return rows


def write_csv(rows: Iterable[BenchRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())
