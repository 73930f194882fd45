"""Row-partitioned execution with a fixed per-element evaluation order.

Kernels hand ``run_row_parallel`` a callable that fills output rows
``[r0, r1)``. Each row is produced by the same numpy operations whatever the
partition, so results do not depend on the thread count.
"""
from __future__ import annotations

import contextlib
import threading
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor

_lock = threading.Lock()
_num_threads = 1
# one pool per size; a pool is never shut down while the process runs
_executors: dict[int, ThreadPoolExecutor] = {}

MAX_THREADS = 64


def set_num_threads(n: int) -> None:
    global _num_threads
    try:
        n = int(n)
    except Exception:
        n = 1
    with _lock:
        _num_threads = max(1, min(MAX_THREADS, n))


def get_num_threads() -> int:
    return _num_threads


@contextlib.contextmanager
def num_threads(n: int) -> Iterator[None]:
    previous = get_num_threads()
    set_num_threads(n)
    try:
        yield
    finally:
        set_num_threads(previous)


def row_chunks(n_rows: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(n_rows)`` into ``parts`` contiguous, nearly equal chunks."""

    parts = max(1, min(int(parts), int(n_rows)))
    base, extra = divmod(int(n_rows), parts)
    chunks: list[tuple[int, int]] = []
    start = 0
    for i in range(parts):
        stop = start + base + (1 if i < extra else 0)
        chunks.append((start, stop))
        start = stop
    return chunks


def _get_executor(size: int) -> ThreadPoolExecutor:
    with _lock:
        pool = _executors.get(size)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=size, thread_name_prefix="dqbc")
            _executors[size] = pool
        return pool


def run_row_parallel(fill_rows: Callable[[int, int], None], n_rows: int) -> None:
    """Call ``fill_rows(r0, r1)`` over a partition of ``range(n_rows)``."""

    threads = get_num_threads()
    if threads <= 1 or n_rows < 2 or threading.current_thread().name.startswith("dqbc"):
        fill_rows(0, n_rows)
        return

    chunks = row_chunks(n_rows, threads)
    pool = _get_executor(threads)
    futures = [pool.submit(fill_rows, r0, r1) for r0, r1 in chunks]
    for fut in futures:
        fut.result()
