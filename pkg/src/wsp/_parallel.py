from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int | None = None) -> int:
    """Explicit count, else ``WSP_THREADS``, else all cores."""
    if workers is None:
        env = os.environ.get("WSP_THREADS")
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ValueError(f"WSP_THREADS must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = 1) -> list[R]:
    """``[fn(i) for i in items]``, optionally on a thread pool; order preserved."""
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
