"""Property suites behind the ``check`` command.

``oracle``: kernels against brute-force loop evaluations.
``grad``: analytic adjoints against central finite differences (float64).
``exact``: integer-shift and one-hot cases that must match bit for bit.
Every suite uses fixed seeds.
"""
from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import Final

import numpy as np
from tabulate import tabulate

from src.core.errors import ConfigurationError
from src.core.gradcheck import DifferentiableOp, finite_diff_check
from src.core.logging import get_logger
from src.core.ops import avgpool2x, conv2d
from src.core.sampling import (
    backward_warp,
    backward_warp_adjoint,
    bilinear_sample,
    translate_fractional,
    translate_fractional_adjoint,
)
from src.core.tensor import ConvSpec
from src.services.correlation import (
    CorrelationVolume,
    PyramidConfig,
    build_key_pyramid,
    channel_meta,
    distribute_correlation,
    distribute_correlation_adjoint,
    gather_unilateral_correlation,
    gather_unilateral_correlation_adjoint,
)
from src.services.motion import (
    LOGIT_CHANNELS,
    UPSAMPLE_TAPS,
    convex_upsample,
    convex_upsample_adjoint,
)

SUITES: Final[tuple[str, ...]] = ("oracle", "grad", "exact")
GRAD_TOLERANCE: Final[float] = 1e-5
ORACLE_TOLERANCE_F32: Final[float] = 1e-5
ORACLE_TOLERANCE_F64: Final[float] = 1e-10
ORACLE_INSTANCES: Final[int] = 20
ONE_HOT_LOGIT: Final[float] = 1000.0


@dataclass(frozen=True, slots=True)
class CheckResult:
    suite: str
    name: str
    max_error: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error)) and self.max_error <= self.tolerance


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def naive_conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, padding: int) -> np.ndarray:
    h, w, c_in = x.shape
    c_out, _, kh, kw = kernel.shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((h_out, w_out, c_out), dtype=np.float64)
    for oy in range(h_out):
        for ox in range(w_out):
            for o in range(c_out):
                acc = 0.0
                for c in range(c_in):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride + ky - padding
                            ix = ox * stride + kx - padding
                            if 0 <= iy < h and 0 <= ix < w:
                                acc += float(kernel[o, c, ky, kx]) * float(x[iy, ix, c])
                out[oy, ox, o] = acc + float(bias[o])
    return out


def naive_block_mean(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    out = np.zeros((h // 2, w // 2, c), dtype=np.float64)
    for y in range(h // 2):
        for xx in range(w // 2):
            for ch in range(c):
                block = [x[2 * y + a, 2 * xx + b, ch] for a in (0, 1) for b in (0, 1)]
                out[y, xx, ch] = sum(float(v) for v in block) / 4.0
    return out


def naive_gather(queries: np.ndarray, keys: np.ndarray, config: PyramidConfig) -> np.ndarray:
    """Nested-loop inner products against the block-mean key pyramid."""

    levels = [np.asarray(keys, dtype=np.float64)]
    for _ in range(config.levels - 1):
        levels.append(naive_block_mean(levels[-1]))
    h, w, c = queries.shape
    out = np.zeros((h, w, config.channels_per_direction), dtype=np.float64)
    for yq in range(h):
        for xq in range(w):
            ch = 0
            for level in range(config.levels):
                step = 2**level
                r = config.radii[level]
                for j in range(-r, r + 1):
                    for i in range(-r, r + 1):
                        kx = (xq + step * i) / step
                        ky = (yq + step * j) / step
                        out[yq, xq, ch] = sum(
                            float(queries[yq, xq, cc]) * bilinear_sample(levels[level], kx, ky, cc)
                            for cc in range(c)
                        )
                        ch += 1
    return out


def naive_convex_upsample(field: np.ndarray, logits: np.ndarray) -> np.ndarray:
    h, w, c = field.shape
    out = np.zeros((2 * h, 2 * w, c), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            for a in (0, 1):
                for b in (0, 1):
                    base = (a * 2 + b) * UPSAMPLE_TAPS
                    z = np.asarray(logits[y, x, base : base + UPSAMPLE_TAPS], dtype=np.float64)
                    e = np.exp(z - z.max())
                    wts = e / e.sum()
                    for ch in range(c):
                        acc = 0.0
                        for k in range(UPSAMPLE_TAPS):
                            dy, dx = k // 3 - 1, k % 3 - 1
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += wts[k] * float(field[yy, xx, ch])
                        out[2 * y + a, 2 * x + b, ch] = 2.0 * acc
    return out


def _max_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)), initial=0.0))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def _oracle_conv(rng: np.random.Generator) -> float:
    x = rng.standard_normal((5, 5, 3))
    kernel = rng.standard_normal((4, 3, 3, 3))
    bias = rng.standard_normal(4)
    worst = 0.0
    for stride in (1, 2):
        got = conv2d(x, ConvSpec(kernel, bias, stride=stride, padding=1))
        worst = max(worst, _max_abs(got, naive_conv2d(x, kernel, bias, stride, 1)))
    return worst


def _oracle_avgpool(rng: np.random.Generator) -> float:
    x = rng.standard_normal((8, 8, 4))
    return _max_abs(avgpool2x(x), naive_block_mean(x))


def _gather_instances(rng: np.random.Generator):
    config = PyramidConfig(levels=3, radii=(2, 1, 1))
    for _ in range(ORACLE_INSTANCES):
        h = int(rng.choice((4, 8)))
        w = int(rng.choice((4, 8)))
        c = int(rng.integers(1, 9))
        q = rng.uniform(-1.0, 1.0, (h, w, c))
        k = rng.uniform(-1.0, 1.0, (h, w, c))
        yield config, q, k


def _oracle_gather(rng: np.random.Generator, dtype: np.dtype) -> float:
    worst = 0.0
    for config, q, k in _gather_instances(rng):
        qd = q.astype(dtype)
        kd = k.astype(dtype)
        got = gather_unilateral_correlation(qd, build_key_pyramid(kd, config), config).scores
        worst = max(worst, _max_abs(got, naive_gather(qd, kd, config)))
    return worst


def _oracle_convex(rng: np.random.Generator) -> float:
    field = rng.standard_normal((4, 5, 2))
    logits = rng.standard_normal((4, 5, LOGIT_CHANNELS)) * 2.0
    return _max_abs(convex_upsample(field, logits), naive_convex_upsample(field, logits))


def _jittered_flow(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    # Fractional parts stay in [0.25, 0.75] so no sample lands near a kink.
    whole = rng.integers(-2, 2, size=shape + (2,)).astype(np.float64)
    return whole + 0.25 + 0.5 * rng.uniform(0.0, 1.0, size=shape + (2,))


WARP_OP = DifferentiableOp(
    "backward_warp",
    backward_warp,
    lambda src, flow, g: backward_warp_adjoint(src, flow, g),
)

TRANSLATE_OP = DifferentiableOp(
    "translate_fractional",
    lambda x, dx, dy: translate_fractional(x, float(dx), float(dy)),
    lambda x, dx, dy, g: translate_fractional_adjoint(x, float(dx), float(dy), g),
)

CONVEX_OP = DifferentiableOp("convex_upsample", convex_upsample, convex_upsample_adjoint)


def gather_op(config: PyramidConfig) -> DifferentiableOp:
    """Gather as a function of (queries, level-0 key features)."""

    def forward(q: np.ndarray, k: np.ndarray) -> np.ndarray:
        return gather_unilateral_correlation(q, build_key_pyramid(k, config), config).scores

    def adjoint(q: np.ndarray, k: np.ndarray, g: np.ndarray):
        return gather_unilateral_correlation_adjoint(q, build_key_pyramid(k, config), config, g)

    return DifferentiableOp("gather_unilateral_correlation", forward, adjoint)


def distribute_op(config: PyramidConfig) -> DifferentiableOp:
    """Distribute as a function of (scores, fraction)."""

    meta = channel_meta(config, 0)

    def forward(scores: np.ndarray, fraction: np.ndarray) -> np.ndarray:
        return distribute_correlation(CorrelationVolume(scores, meta), float(fraction)).scores

    def adjoint(scores: np.ndarray, fraction: np.ndarray, g: np.ndarray):
        return distribute_correlation_adjoint(CorrelationVolume(scores, meta), float(fraction), g)

    return DifferentiableOp("distribute_correlation", forward, adjoint)


def _grad_cases(rng: np.random.Generator) -> list[tuple[DifferentiableOp, list]]:
    small = PyramidConfig(levels=2, radii=(1, 1))
    return [
        (WARP_OP, [rng.standard_normal((5, 5, 2)), _jittered_flow(rng, (5, 5))]),
        (TRANSLATE_OP, [rng.standard_normal((5, 6, 2)), np.array(0.37), np.array(-1.41)]),
        (gather_op(small), [rng.standard_normal((4, 4, 3)), rng.standard_normal((4, 4, 3))]),
        (distribute_op(small), [rng.standard_normal((4, 4, small.channels_per_direction)), np.array(0.37)]),
        (CONVEX_OP, [rng.standard_normal((3, 3, 2)), rng.standard_normal((3, 3, LOGIT_CHANNELS))]),
    ]


def _exact_cases(dtype: np.dtype, rng: np.random.Generator) -> list[tuple[str, float]]:
    src = rng.uniform(0.0, 1.0, (6, 7, 3)).astype(dtype)
    out: list[tuple[str, float]] = []

    zero = np.zeros((6, 7, 2), dtype=dtype)
    same = np.array_equal(backward_warp(src, zero), src)
    out.append(("zero-flow warp identity", 0.0 if same else np.inf))

    right = np.zeros_like(zero)
    right[..., 0] = 1.0
    expected = np.zeros_like(src)
    expected[:, :-1] = src[:, 1:]
    out.append(("integer-flow warp shift", _max_abs(backward_warp(src, right), expected)))

    expected = np.zeros_like(src)
    expected[:, 1:] = src[:, :-1]
    out.append(("integer translate shift", _max_abs(translate_fractional(src, 1.0, 0.0), expected)))

    config = PyramidConfig(levels=2, radii=(1, 1))
    scores = rng.uniform(-1.0, 1.0, (8, 8, config.channels_per_direction)).astype(dtype)
    corr = CorrelationVolume(scores, channel_meta(config, 0))
    shifted = distribute_correlation(corr, 1.0).scores
    worst = 0.0
    for ch, m in enumerate(corr.meta):
        expected = np.zeros((8, 8), dtype=dtype)
        ys = slice(max(m.dy, 0), 8 + min(m.dy, 0))
        xs = slice(max(m.dx, 0), 8 + min(m.dx, 0))
        ys_src = slice(max(-m.dy, 0), 8 + min(-m.dy, 0))
        xs_src = slice(max(-m.dx, 0), 8 + min(-m.dx, 0))
        expected[ys, xs] = scores[ys_src, xs_src, ch]
        worst = max(worst, _max_abs(shifted[:, :, ch], expected))
    out.append(("integer distribute shift", worst))

    field = rng.standard_normal((3, 4, 2)).astype(dtype)
    logits = np.zeros((3, 4, LOGIT_CHANNELS), dtype=dtype)
    logits[:, :, 4::UPSAMPLE_TAPS] = ONE_HOT_LOGIT
    expected = 2 * np.repeat(np.repeat(field, 2, axis=0), 2, axis=1)
    out.append(("one-hot convex upsample", _max_abs(convex_upsample(field, logits), expected)))
    return out


def _timed(suite: str, name: str, tolerance: float, fn: Callable[[], float]) -> CheckResult:
    start = time.perf_counter()
    err = float(fn())
    return CheckResult(suite, name, err, tolerance, time.perf_counter() - start)


def run_oracle_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    f64 = np.dtype(np.float64)
    f32 = np.dtype(np.float32)
    return [
        _timed("oracle", "conv2d vs loop", 1e-10, lambda: _oracle_conv(rng)),
        _timed("oracle", "avgpool2x vs block mean", 0.0, lambda: _oracle_avgpool(rng)),
        _timed("oracle", "gather vs loop (float64)", ORACLE_TOLERANCE_F64, lambda: _oracle_gather(np.random.default_rng(seed + 1), f64)),
        _timed("oracle", "gather vs loop (float32)", ORACLE_TOLERANCE_F32, lambda: _oracle_gather(np.random.default_rng(seed + 1), f32)),
        _timed("oracle", "convex_upsample vs loop", 1e-10, lambda: _oracle_convex(rng)),
    ]


def run_grad_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for op, inputs in _grad_cases(rng):
        results.append(
            _timed("grad", op.name, GRAD_TOLERANCE, lambda op=op, inputs=inputs: finite_diff_check(op, inputs, seed=seed))
        )
    return results


def run_exact_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    for dtype in (np.dtype(np.float32), np.dtype(np.float64)):
        rng = np.random.default_rng(seed)
        for name, err in _exact_cases(dtype, rng):
            results.append(CheckResult("exact", f"{name} ({dtype.name})", err, 0.0))
    return results


_RUNNERS: Final[dict[str, Callable[[int], list[CheckResult]]]] = {
    "oracle": run_oracle_suite,
    "grad": run_grad_suite,
    "exact": run_exact_suite,
}


def run_checks(selector: str = "all", seed: int = 0) -> list[CheckResult]:
    """Run one suite or all of them (``selector`` in all|oracle|grad|exact)."""

    key = str(selector or "all").strip().lower()
    if key != "all" and key not in _RUNNERS:
        raise ConfigurationError(f"unknown suite {selector!r}; expected all, {', '.join(SUITES)}")
    logger = get_logger("dqbc.core")
    results: list[CheckResult] = []
    for name in SUITES if key == "all" else (key,):
        suite = _RUNNERS[name](seed)
        failed = sum(not r.passed for r in suite)
        logger.info("suite %s: %d checks, %d failed", name, len(suite), failed)
        results.extend(suite)
    return results


def format_report(results: list[CheckResult], tablefmt: str = "pretty") -> str:
    rows = [
        [r.suite, r.name, f"{r.max_error:.3e}", f"{r.tolerance:.0e}", "PASS" if r.passed else "FAIL"]
        for r in results
    ]
    return str(
        tabulate(
            rows,
            headers=["suite", "check", "max error", "tolerance", "result"],
            tablefmt=tablefmt,
            numalign="left",
            stralign="left",
        )
    ).strip()
