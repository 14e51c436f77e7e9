"""Index-ordered task execution, optionally across worker processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(requested: int | None = None) -> int:
    """Explicit request, else ``GHM_THREADS``, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GHM_THREADS", "").strip()
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def run_indexed(func, n: int, workers: int = 1) -> list:
    """``[func(0), ..., func(n-1)]``; order never depends on scheduling."""
    if workers <= 1 or n <= 1:
        return [func(i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
        return list(pool.map(func, range(n), chunksize=max(1, n // (4 * workers))))
