"""Deterministic replica scheduling.

A replica is a pure function of its stream index, so results depend only on
the index range; chunks may finish in any order but are folded back in index
order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence


def _run_chunk(task: Callable, lo: int, hi: int, args: tuple) -> list:
    return [task(i, *args) for i in range(lo, hi)]


def _chunks(lo: int, hi: int, n_chunks: int) -> list[tuple[int, int]]:
    n = hi - lo
    n_chunks = max(1, min(n_chunks, n))
    bounds = [lo + (n * k) // n_chunks for k in range(n_chunks + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_replicas(task: Callable, lo: int, hi: int, workers: int = 1, args: Sequence[Any] = ()) -> list:
    """``[task(i, *args) for i in range(lo, hi)]``, optionally over a process pool.

    ``task`` must be a module-level function so it can be pickled.
    """
    args = tuple(args)
    if workers <= 1 or hi - lo <= 1:
        return _run_chunk(task, lo, hi, args)
    parts = _chunks(lo, hi, 4 * workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, task, a, b, args) for a, b in parts]
        out: list = []
        for fut in futures:
            out.extend(fut.result())
    return out
