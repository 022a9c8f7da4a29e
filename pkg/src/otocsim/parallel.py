"""Deterministic parallel evaluation over indexed samples.

Every sample ``i`` draws from its own generator derived from ``(seed, i)``,
so the value computed for a sample never depends on which worker ran it or
in what order. Results land in slots indexed by sample id and callers reduce
them sequentially in index order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """Generator for sample ``index`` under master ``seed`` (counter-based split)."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    if n == 0:
        return []
    n_chunks = min(n, max(1, workers) * 4)
    size = math.ceil(n / n_chunks)
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def _call_chunk(args):
    fn, start, stop = args
    return [fn(i) for i in range(start, stop)]


def indexed_map(fn: Callable[[int], object], n: int, workers: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]`` computed on up to ``workers`` processes.

    ``fn`` must be picklable when ``workers > 1`` (module-level function or
    ``functools.partial`` of one).
    """
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    jobs = [(fn, a, b) for a, b in _chunks(n, workers)]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_call_chunk, jobs):
            out.extend(part)
    return out


def ordered_mean(values: Sequence[float]) -> float:
    """Compensated mean, summed in the given (index) order."""
    return math.fsum(values) / len(values)
