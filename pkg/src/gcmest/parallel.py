from __future__ import annotations

from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any


def ordered_map(fn: Callable[[Any], Any], jobs: Iterable[Any], workers: int = 1) -> list[Any]:
    """Apply ``fn`` to each job, in a process pool when ``workers > 1``.

    Results come back in job order; jobs must be picklable and ``fn`` must be
    a module-level function.
    """
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))
