"""Deterministic block-parallel map.

Work is cut into fixed blocks of consecutive path indices. Block boundaries
depend only on the problem size, never on the worker count, and results are
returned in block order, so outputs are identical for any number of workers.
"""

from __future__ import annotations

import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

R = TypeVar("R")

BLOCK = 256


def default_workers() -> int:
    raw = os.environ.get("SVV_WORKERS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


def blocks(n: int, block: int = BLOCK) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


def map_blocks(fn: Callable[[int, int], R], n: int, workers: int | None = None, block: int = BLOCK) -> list[R]:
    """``[fn(lo, hi) for (lo, hi) in blocks(n)]``, possibly on a thread pool."""
    parts = blocks(n, block)
    w = default_workers() if workers is None else max(1, int(workers))
    if w == 1 or len(parts) <= 1:
        return [fn(lo, hi) for lo, hi in parts]
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in parts]
        return [f.result() for f in futures]
