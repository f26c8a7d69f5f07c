"""Ordered map over independent tasks, serial or in worker processes.

Tasks are fixed before dispatch and results come back in task order, so the
outcome never depends on the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    return os.cpu_count() or 1


def ordered_map(fn, tasks, workers: int | None = None):
    tasks = list(tasks)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


def chunks(n: int, size: int):
    """Consecutive ``range`` blocks of at most ``size`` covering ``range(n)``."""
    size = max(1, int(size))
    return [range(i, min(i + size, n)) for i in range(0, n, size)]
