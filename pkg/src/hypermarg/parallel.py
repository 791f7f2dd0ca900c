"""Probe-level thread parallelism.

Per-probe work (Lanczos runs, probe solves) is embarrassingly parallel.  The
thread pool size is controlled by the ``HYPERMARG_THREADS`` environment
variable (default 1).  Results are always collected in input order and
reduced with numpy's pairwise summation, so numbers are bit-identical
whatever the pool size.
"""

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "probe_map"]


def thread_count():
    raw = os.environ.get("HYPERMARG_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n) if raw else 1


def probe_map(fn, items):
    """Map ``fn`` over ``items``, in threads if configured; ordered results."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
