"""Data-parallel exploitation backend and the one-way edge transfer.

The worker pool plays the role of a device: Improve hands each worker a
contiguous slice of the promising set (plain per-vertex assignment, no load
balancing), Evaluate processes one tree level per fork-join wave, and edges
cross from the exploration side exactly once through ``StagingBuffer``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import CsrGraph, EdgeBatch, GraphCorruptionError, VertexStore, rebuild_csr
from .kernels import (
    CHILD_TEST, GOAL, INIT, ChildIndex, evaluate_level, improve_rows, improve_set,
)

WORKERS_ENV = "BERRT_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class Frontier:
    """Double-buffered level frontier."""

    current: np.ndarray = field(default_factory=lambda: np.array([INIT], dtype=np.int64))
    next: list = field(default_factory=list)

    def swap(self):
        self.current = (np.concatenate(self.next) if self.next
                        else np.empty(0, dtype=np.int64))
        self.next = []


@dataclass
class StagingBuffer:
    """Unconsumed tail of the exploration edge list."""

    batch: EdgeBatch
    watermark: int = 0
    consumed: int = 0

    def pending(self) -> int:
        return len(self.batch) - self.watermark


def sync_and_rebuild(staging: StagingBuffer, csr: CsrGraph, n_vertices: int,
                     validate: bool = False) -> CsrGraph:
    """Consume ``[watermark, end)`` of the staging list into a fresh CSR."""
    end = len(staging.batch)
    if end < staging.watermark:
        raise GraphCorruptionError("staging watermark ahead of the edge list")
    lo = staging.watermark
    b = staging.batch
    out = rebuild_csr(csr, b.src[lo:end], b.dst[lo:end], b.cost[lo:end], n_vertices,
                      validate=validate)
    staging.consumed += end - lo
    staging.watermark = end
    return out


def _chunks(arr: np.ndarray, workers: int):
    return [c for c in np.array_split(arr, workers) if len(c)]


def improve_parallel(csr: CsrGraph, vs: VertexStore, B, workers: int,
                     pool: ThreadPoolExecutor | None = None, with_neighbors: bool = True):
    rows, trusted = improve_set(csr, B, len(vs), with_neighbors)
    g, h = vs.g, vs.h
    own = pool is None
    pool = pool or ThreadPoolExecutor(workers)
    try:
        parts = list(pool.map(lambda r: improve_rows(csr, g, r, trusted, h),
                              _chunks(rows, workers)))
    finally:
        if own:
            pool.shutdown()
    delta = 0.0
    parent, parent_cost = vs.parent, vs.parent_cost
    # barrier: g is read-only during the wave, parents are written afterwards
    for upd, par, pc, d in parts:
        parent[upd] = par
        parent_cost[upd] = pc
        delta = max(delta, d)
    return parent, delta


def evaluate_parallel(csr: CsrGraph, vs: VertexStore, workers: int,
                      pool: ThreadPoolExecutor | None = None, test: str = CHILD_TEST,
                      validate: bool = False):
    g, h, parent, parent_cost = vs.g, vs.h, vs.parent, vs.parent_cost
    children = ChildIndex(parent)
    frontier = Frontier()
    levels = []
    seen = 0
    own = pool is None
    pool = pool or ThreadPoolExecutor(workers)
    try:
        while len(frontier.current):
            threshold = float(g[GOAL])
            chunks = _chunks(frontier.current, workers)
            if len(chunks) == 1:
                frontier.next = [evaluate_level(children, g, h, parent, parent_cost,
                                                chunks[0], threshold, test)]
            else:
                frontier.next = list(pool.map(
                    lambda f: evaluate_level(children, g, h, parent, parent_cost, f,
                                             threshold, test),
                    chunks))
            frontier.swap()
            if validate:
                if len(np.unique(frontier.current)) != len(frontier.current):
                    raise GraphCorruptionError("vertex repeated within a frontier")
                seen += len(frontier.current)
                if seen > len(vs):
                    raise GraphCorruptionError("policy traversal revisited a vertex (cycle)")
            levels.append(frontier.current)
    finally:
        if own:
            pool.shutdown()
    B = np.sort(np.concatenate(levels)) if levels else np.empty(0, dtype=np.int64)
    vs.promising[:] = False
    vs.promising[B] = True
    return g, B


class ParallelBackend:
    name = "parallel"

    def __init__(self, workers: int | None = None, with_neighbors: bool = True,
                 test: str = CHILD_TEST, validate: bool = False):
        self.workers = workers or default_workers()
        self.with_neighbors = with_neighbors
        self.test = test
        self.validate = validate
        self._pool = ThreadPoolExecutor(self.workers)

    def improve(self, csr, vs, B):
        return improve_parallel(csr, vs, B, self.workers, self._pool, self.with_neighbors)[1]

    def evaluate(self, csr, vs):
        return evaluate_parallel(csr, vs, self.workers, self._pool, self.test, self.validate)[1]

    def close(self):
        self._pool.shutdown()
