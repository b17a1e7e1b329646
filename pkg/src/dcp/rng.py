"""Seeded random streams and replica orchestration.

Replica ``i`` of a run with master seed ``s`` always draws from the Philox
stream keyed by ``SeedSequence(s, spawn_key=(i,))``, so results do not
depend on how replicas are distributed over worker processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return make_rng(seed, replica)


def map_replicas(fn: Callable, args: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to every element of ``args``; output order follows ``args``.

    ``fn`` must be a picklable module-level function when ``workers > 1``.
    """
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))
