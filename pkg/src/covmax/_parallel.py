"""Replication fan-out with results independent of the worker count."""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

import numpy as np


def worker_count(requested: Optional[int] = None) -> int:
    """Requested workers capped by ``COVMAX_THREADS`` (default: 1)."""
    cap = os.environ.get("COVMAX_THREADS")
    n = requested if requested is not None else int(cap) if cap else 1
    if cap:
        n = min(n, int(cap))
    return max(1, int(n))


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    """Generator for replication ``rep``, derived from the master seed only."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


def run_reps(fn: Callable, reps: int, args: tuple, workers: Optional[int] = None,
             chunk: int = 50, deadline: Optional[float] = None) -> np.ndarray:
    """Evaluate ``fn(rep_indices, *args)`` over all replications.

    ``fn`` must return one row per replication index.  Chunks are reduced in
    replication order, so the output does not depend on scheduling.
    ``deadline`` is a ``time.monotonic()`` value checked between chunks.
    """
    from .errors import ResourceLimitExceeded

    def check():
        if deadline is not None and time.monotonic() > deadline:
            raise ResourceLimitExceeded("Monte Carlo run exceeded its time limit")

    blocks = [np.arange(s, min(s + chunk, reps)) for s in range(0, reps, chunk)]
    nw = worker_count(workers)
    if nw == 1 or len(blocks) == 1:
        parts = []
        for b in blocks:
            check()
            parts.append(fn(b, *args))
    else:
        parts = []
        with ProcessPoolExecutor(max_workers=nw) as ex:
            futures = [ex.submit(fn, b, *args) for b in blocks]
            try:
                for f in futures:
                    parts.append(f.result())
                    check()
            except ResourceLimitExceeded:
                for f in futures:
                    f.cancel()
                raise
    return np.concatenate(parts, axis=0)
