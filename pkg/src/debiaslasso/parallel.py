"""Order-preserving thread-pool map used for replicate-level parallelism."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "DEBIAS_LASSO_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def parallel_map(fn, items, threads: int | None = 1) -> list:
    """``[fn(x) for x in items]`` computed on up to ``threads`` workers.

    Results come back in input order, so any reduction over them is
    independent of scheduling.
    """
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
