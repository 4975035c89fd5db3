"""Order-deterministic parallel map over fixed-size chunks of run indices.

Chunk boundaries depend only on the run count and chunk size, never on the
worker count, so every run is computed in exactly the same batch whichever
way chunks are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial


def chunk_ranges(runs: int, chunk: int):
    return [range(start, min(start + chunk, runs)) for start in range(0, runs, chunk)]


def _call(fn, kwargs, run_ids):
    return fn(run_ids=list(run_ids), **kwargs)


def map_chunks(fn, runs: int, chunk: int, workers: int = 1, **kwargs) -> list:
    """``[fn(run_ids=chunk_k, **kwargs) for each chunk]`` in chunk order."""
    chunks = chunk_ranges(runs, max(1, int(chunk)))
    task = partial(_call, fn, kwargs)
    if workers <= 1 or len(chunks) <= 1:
        return [task(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, chunks))
