"""Fan-out of independent per-event work over a thread pool.

Chunks are contiguous and results are concatenated in input order, so the
outcome does not depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_WORKERS = "CONFSTAT_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def map_chunks(fn, pts: np.ndarray, workers: int | None = None, chunk: int = 256) -> dict:
    """Apply ``fn(points) -> dict of per-event arrays`` chunkwise and concatenate."""
    workers = default_workers() if workers is None else max(1, int(workers))
    pieces = [pts[i : i + chunk] for i in range(0, len(pts), chunk)] or [pts]
    if workers == 1 or len(pieces) == 1:
        results = [fn(p) for p in pieces]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, pieces))
    return {k: np.concatenate([r[k] for r in results]) for k in results[0]}
