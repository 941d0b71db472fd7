"""Deterministic ensemble execution.

Work items are pure functions of their payload; results are merged in
submission order, so the output is identical for any worker count.  Items
must be picklable when jobs > 1 (models are passed as name + params and
rebuilt in the worker).

Callers that batch numpy state arrays must slice them into WORK_UNIT-sized
blocks before distribution: numpy ufuncs pick SIMD code paths by array
length, so only fixed block shapes make results bit-identical across
worker counts.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

WORK_UNIT = 32


def deterministic_map(fn, items, jobs=1):
    """Map fn over items, preserving order; processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(items) // (4 * jobs))
        return list(pool.map(fn, items, chunksize=chunk))
