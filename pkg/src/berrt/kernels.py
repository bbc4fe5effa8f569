"""Per-vertex and per-level exploitation kernels shared by both backends.

Every kernel works on an arbitrary slice of its index set and writes only to
the vertices it owns, so the parallel backend can hand disjoint slices to
workers and get exactly the serial result.
"""

from __future__ import annotations

import numpy as np

from .graph import NO_PARENT, CsrGraph

INIT = 0
GOAL = 1

CHILD_TEST = "child"
LITERAL_TEST = "literal"


def gather_rows(row_offsets: np.ndarray, rows: np.ndarray):
    """Flattened CSR positions of ``rows`` plus per-row counts and run offsets."""
    starts = row_offsets[rows]
    counts = row_offsets[rows + 1] - starts
    total = int(counts.sum())
    run_offsets = np.cumsum(counts) - counts
    idx = np.arange(total, dtype=np.int64) + np.repeat(starts - run_offsets, counts)
    return idx, counts, run_offsets


def improve_set(csr: CsrGraph, B: np.ndarray, n_vertices: int, with_neighbors: bool = True):
    """Vertices Improve relaxes, and the mask of trusted parents.

    Rows are B plus, optionally, every neighbor of B or x_init. A row outside
    B may only adopt a parent from B or x_init; the g of any other vertex can
    be stale and adopting it would never be re-evaluated.
    """
    B = np.fromiter(sorted(B), np.int64) if isinstance(B, set) else np.asarray(B, dtype=np.int64)
    trusted = np.zeros(n_vertices, dtype=bool)
    trusted[B] = True
    trusted[INIT] = True
    if not with_neighbors:
        return np.setdiff1d(B, [INIT]), None
    idx, _, _ = gather_rows(csr.row_offsets, np.flatnonzero(trusted))
    member = trusted.copy()
    member[csr.col_indices[idx]] = True
    member[INIT] = False
    return np.flatnonzero(member), trusted


def improve_rows(csr: CsrGraph, g: np.ndarray, rows: np.ndarray, trusted=None, h=None):
    """Best parent for each vertex in ``rows`` from the current ``g``.

    With ``trusted`` given, rows that are not themselves trusted only consider
    trusted neighbors. With ``h`` also given, such a row contributes to delta
    only if its new value passes the promising test; anything else cannot
    shorten the path to the goal.

    Returns ``(updated, new_parent, new_parent_cost, delta)`` where ``updated``
    lists the rows whose best candidate strictly beats their ``g``. Ties go to
    the lowest neighbor id (CSR rows are sorted by column).
    """
    rows = np.asarray(rows, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    if len(rows) == 0:
        return empty, empty, np.empty(0), 0.0
    idx, counts, run_offsets = gather_rows(csr.row_offsets, rows)
    keep = counts > 0
    if not keep.any():
        return empty, empty, np.empty(0), 0.0
    rows, counts, run_offsets = rows[keep], counts[keep], run_offsets[keep]
    cols = csr.col_indices[idx]
    vals = csr.edge_costs[idx] + g[cols]
    if trusted is not None:
        outside = np.repeat(~trusted[rows], counts)
        vals[outside & ~trusted[cols]] = np.inf
    best = np.minimum.reduceat(vals, run_offsets)
    seg = np.repeat(np.arange(len(rows)), counts)
    hits = np.flatnonzero(vals == best[seg])
    # all-inf rows match everywhere; harmless since inf never beats g
    first = hits[np.r_[True, seg[hits][1:] != seg[hits][:-1]]]
    current = g[rows]
    better = best < current
    pick = idx[first[better]]
    counts_delta = better
    if trusted is not None and h is not None:
        counts_delta = better & (trusted[rows] | (best + h[rows] <= g[GOAL]))
    delta = float(np.max(current[counts_delta] - best[counts_delta])) if counts_delta.any() else 0.0
    return rows[better], csr.col_indices[pick], csr.edge_costs[pick], delta


class ChildIndex:
    """Policy-tree children as a CSR over parent pointers."""

    def __init__(self, parent: np.ndarray):
        n = len(parent)
        has = parent != NO_PARENT
        kids = np.flatnonzero(has)
        par = parent[has]
        self.order = kids[np.argsort(par, kind="stable")]
        self.offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(par, minlength=n), out=self.offsets[1:])

    def children(self, frontier: np.ndarray) -> np.ndarray:
        idx, _, _ = gather_rows(self.offsets, np.asarray(frontier, dtype=np.int64))
        return self.order[idx]


def evaluate_level(children: ChildIndex, g, h, parent, parent_cost, frontier,
                   threshold: float, test: str = CHILD_TEST) -> np.ndarray:
    """Relax the policy children of ``frontier``; return those that stay promising."""
    kids = children.children(frontier)
    if len(kids) == 0:
        return kids
    par = parent[kids]
    g[kids] = parent_cost[kids] + g[par]
    if test == CHILD_TEST:
        keep = np.isfinite(g[kids]) & (g[kids] + h[kids] <= threshold)
    elif test == LITERAL_TEST:
        keep = h[par] + g[par] < threshold
    else:
        raise ValueError(f"unknown promising test {test!r}")
    return kids[keep]


def is_promising(g: float, h: float, g_goal: float) -> bool:
    return bool(np.isfinite(g) and g + h <= g_goal)
