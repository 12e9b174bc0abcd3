"""Process-pool helpers shared by studies and grid searches."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError

WORKERS_ENV = "FTREGRESS_WORKERS"


def worker_count(default: int = 1) -> int:
    """Number of worker processes from ``$FTREGRESS_WORKERS``."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def parallel_map(fn, items, workers: int = 1) -> list:
    """``list(map(fn, items))``, on a process pool when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
