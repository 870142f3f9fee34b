"""Deterministic point-parallel map.

Workers may execute in any order; each task derives its randomness from its
own keyed stream, and results are merged by task index, so the thread count
never changes numerical output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")


def map_indexed(fn: Callable[[int], T], n: int, threads: int = 1) -> list[T]:
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))
