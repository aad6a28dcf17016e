"""Deterministic fan-out for sweep workloads.

Cells run with derived seeds (base_seed + cell index) and results are
gathered in cell order, so the output is identical whether the pool has
one worker or many.  FLUIDLAB_THREADS caps the worker count; 0 or unset
means auto.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence


def worker_count() -> int:
    raw = os.environ.get("FLUIDLAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError("FLUIDLAB_THREADS must be an integer, got %r" % raw)
    if n < 0:
        raise ValueError("FLUIDLAB_THREADS must be >= 0")
    if n == 0:
        return min(32, os.cpu_count() or 1)
    return n


def run_cells(
    fn: Callable,
    cells: Sequence,
    base_seed: int = 0,
    workers: Optional[int] = None,
) -> List:
    """Evaluate fn(cell, seed) for every cell, seed = base_seed + index.

    Results come back in cell order regardless of completion order.
    """
    cells = list(cells)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(cells) <= 1:
        return [fn(cell, base_seed + i) for i, cell in enumerate(cells)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(fn, cell, base_seed + i) for i, cell in enumerate(cells)
        ]
        return [f.result() for f in futures]
