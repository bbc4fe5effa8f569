"""Vertex/edge storage: SoA vertex properties, COO edge staging and CSR adjacency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NO_PARENT = -1


class GraphCorruptionError(RuntimeError):
    pass


class _Growable:
    """Amortized O(1) append on top of a numpy buffer."""

    def __init__(self, dtype, width=None, capacity=64):
        shape = (capacity,) if width is None else (capacity, width)
        self._buf = np.empty(shape, dtype=dtype)
        self.n = 0

    def reserve(self, extra):
        need = self.n + extra
        if need > len(self._buf):
            cap = max(need, 2 * len(self._buf))
            new = np.empty((cap,) + self._buf.shape[1:], dtype=self._buf.dtype)
            new[: self.n] = self._buf[: self.n]
            self._buf = new

    def append(self, value):
        self.reserve(1)
        self._buf[self.n] = value
        self.n += 1

    def extend(self, values):
        values = np.asarray(values, dtype=self._buf.dtype)
        self.reserve(len(values))
        self._buf[self.n : self.n + len(values)] = values
        self.n += len(values)

    @property
    def view(self):
        return self._buf[: self.n]


class VertexStore:
    """Per-vertex properties held as parallel arrays.

    ``parent_cost`` caches c(parent(v), v) so policy evaluation never touches
    states.
    """

    def __init__(self, capacity: int = 64):
        self._states = _Growable(np.float64, 2, capacity)
        self._g = _Growable(np.float64, None, capacity)
        self._h = _Growable(np.float64, None, capacity)
        self._parent = _Growable(np.int64, None, capacity)
        self._parent_cost = _Growable(np.float64, None, capacity)
        self._promising = _Growable(np.bool_, None, capacity)

    def __len__(self):
        return self._g.n

    states = property(lambda self: self._states.view)
    g = property(lambda self: self._g.view)
    h = property(lambda self: self._h.view)
    parent = property(lambda self: self._parent.view)
    parent_cost = property(lambda self: self._parent_cost.view)
    promising = property(lambda self: self._promising.view)

    def copy(self) -> "VertexStore":
        out = VertexStore(max(len(self), 1))
        for name in ("_states", "_g", "_h", "_parent", "_parent_cost", "_promising"):
            getattr(out, name).extend(getattr(self, name).view)
        return out


def add_vertex(vs: VertexStore, s, g: float, h: float, parent=None,
               parent_cost: float = np.inf, promising: bool = False) -> int:
    vid = len(vs)
    vs._states.append(np.asarray(s, dtype=float))
    vs._g.append(g)
    vs._h.append(h)
    vs._parent.append(NO_PARENT if parent is None else parent)
    vs._parent_cost.append(0.0 if parent is None and g == 0 else parent_cost)
    vs._promising.append(promising)
    return vid


class EdgeBatch:
    """Append-only coordinate list of directed (src, dst, cost) triples."""

    def __init__(self, validate: bool = False):
        self._src = _Growable(np.int64)
        self._dst = _Growable(np.int64)
        self._cost = _Growable(np.float64)
        self.validate = validate
        self._seen: set[tuple[int, int]] = set()

    def __len__(self):
        return self._src.n

    src = property(lambda self: self._src.view)
    dst = property(lambda self: self._dst.view)
    cost = property(lambda self: self._cost.view)

    def triples(self, start: int = 0, stop: int | None = None):
        stop = len(self) if stop is None else stop
        return list(zip(self.src[start:stop].tolist(), self.dst[start:stop].tolist(),
                        self.cost[start:stop].tolist()))


def append_edges(batch: EdgeBatch, triples) -> EdgeBatch:
    """Append triples in order. Duplicate (src, dst) pairs raise in validation mode."""
    if isinstance(triples, tuple) and len(triples) == 3 and isinstance(triples[0], np.ndarray):
        src, dst, cost = triples
    else:
        triples = list(triples)
        if not triples:
            return batch
        src, dst, cost = (np.array(col) for col in zip(*triples))
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    cost = np.asarray(cost, dtype=np.float64)
    if batch.validate:
        if np.any(cost < 0):
            raise ValueError("negative edge cost")
        for pair in zip(src.tolist(), dst.tolist()):
            if pair in batch._seen:
                raise ValueError(f"duplicate edge {pair}")
            batch._seen.add(pair)
    batch._src.extend(src)
    batch._dst.extend(dst)
    batch._cost.extend(cost)
    return batch


ID_BITS = 32


def pack_keys(src, dst) -> np.ndarray:
    """Sort key (src, dst) packed into one unsigned 64-bit word."""
    return (np.asarray(src).astype(np.uint64) << np.uint64(ID_BITS)) | np.asarray(dst).astype(np.uint64)


@dataclass(frozen=True)
class CsrGraph:
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_costs: np.ndarray
    keys: np.ndarray | None = None

    @classmethod
    def empty(cls, n_vertices: int = 0) -> "CsrGraph":
        return cls(np.zeros(n_vertices + 1, dtype=np.int64),
                   np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                   np.empty(0, dtype=np.uint64))

    @classmethod
    def from_triples(cls, src, dst, cost, n_vertices: int) -> "CsrGraph":
        return rebuild_csr(cls.empty(n_vertices), src, dst, cost, n_vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.row_offsets) - 1

    @property
    def n_edges(self) -> int:
        return len(self.col_indices)

    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_vertices, dtype=np.int64), np.diff(self.row_offsets))

    def sorted_keys(self) -> np.ndarray:
        return self.keys if self.keys is not None else pack_keys(self.sources(), self.col_indices)

    def check(self):
        ro = self.row_offsets
        if ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise GraphCorruptionError("row_offsets not nondecreasing from 0")
        if ro[-1] != len(self.col_indices) or len(self.col_indices) != len(self.edge_costs):
            raise GraphCorruptionError("row_offsets[-1] disagrees with edge arrays")
        src = self.sources()
        same_row = src[1:] == src[:-1]
        if np.any(self.col_indices[1:][same_row] <= self.col_indices[:-1][same_row]):
            raise GraphCorruptionError("row columns not strictly increasing")


def radix_argsort(keys: np.ndarray) -> np.ndarray:
    """Stable LSD radix sort permutation over 16-bit digits of unsigned keys."""
    keys = np.asarray(keys, dtype=np.uint64)
    perm = np.arange(len(keys), dtype=np.int64)
    if len(keys) < 2:
        return perm
    top = max(int(keys.max()).bit_length(), 1)
    for shift in range(0, top, 16):
        digit = ((keys[perm] >> np.uint64(shift)) & np.uint64(0xFFFF)).astype(np.uint16)
        # numpy's stable sort on 16-bit integers is itself a radix pass
        perm = perm[np.argsort(digit, kind="stable")]
    return perm


def rebuild_csr(old: CsrGraph, staged_src, staged_dst, staged_cost, n_vertices: int,
                validate: bool = False) -> CsrGraph:
    """Merge a staged COO segment into ``old``; ``old`` is left untouched.

    The segment is radix-sorted, each new edge's slot is its rank in the old
    edge list plus its own index, and old edges fill the remaining slots.
    """
    staged_src = np.asarray(staged_src, dtype=np.int64)
    staged_dst = np.asarray(staged_dst, dtype=np.int64)
    staged_cost = np.asarray(staged_cost, dtype=np.float64)
    if n_vertices < old.n_vertices:
        raise GraphCorruptionError("vertex count shrank")
    if n_vertices >= 1 << ID_BITS:
        raise GraphCorruptionError("vertex ids exceed the packed key width")
    if len(staged_src):
        if (staged_src.max() >= n_vertices or staged_dst.max() >= n_vertices
                or staged_src.min() < 0 or staged_dst.min() < 0):
            raise GraphCorruptionError("staged edge references an unknown vertex")
    old_keys = old.sorted_keys()
    row_offsets = np.empty(n_vertices + 1, dtype=np.int64)
    row_offsets[: old.n_vertices + 1] = old.row_offsets
    row_offsets[old.n_vertices + 1:] = old.row_offsets[-1]
    if len(staged_src) == 0:
        return CsrGraph(row_offsets, old.col_indices, old.edge_costs, old_keys)

    new_keys = pack_keys(staged_src, staged_dst)
    perm = radix_argsort(new_keys)
    new_keys = new_keys[perm]
    pos_new = np.arange(len(new_keys)) + np.searchsorted(old_keys, new_keys, side="right")
    total = len(old_keys) + len(new_keys)
    old_slot = np.ones(total, dtype=bool)
    old_slot[pos_new] = False
    keys = np.empty(total, dtype=np.uint64)
    cols = np.empty(total, dtype=np.int64)
    costs = np.empty(total, dtype=np.float64)
    keys[old_slot], keys[pos_new] = old_keys, new_keys
    cols[old_slot], cols[pos_new] = old.col_indices, staged_dst[perm]
    costs[old_slot], costs[pos_new] = old.edge_costs, staged_cost[perm]
    if validate and np.any(keys[1:] == keys[:-1]):
        raise GraphCorruptionError("duplicate edge in CSR")
    added = np.bincount(staged_src, minlength=n_vertices)
    row_offsets[1:] += np.cumsum(added)
    out = CsrGraph(row_offsets, cols, costs, keys)
    if validate:
        out.check()
    return out


def out_edges(csr: CsrGraph, v: int):
    if not 0 <= v < csr.n_vertices:
        raise IndexError(f"vertex {v} out of range [0, {csr.n_vertices})")
    lo, hi = csr.row_offsets[v], csr.row_offsets[v + 1]
    return list(zip(csr.col_indices[lo:hi].tolist(), csr.edge_costs[lo:hi].tolist()))


def dump_edge_list(csr: CsrGraph, path):
    """Write ``src dst cost`` per line; costs in round-trip ``repr`` form."""
    with open(path, "w") as fh:
        for s, d, c in zip(csr.sources().tolist(), csr.col_indices.tolist(),
                           csr.edge_costs.tolist()):
            fh.write(f"{s} {d} {c!r}\n")


def load_edge_list(path):
    triples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                s, d, c = line.split()
                triples.append((int(s), int(d), float(c)))
    return triples


def check_policy_forest(vs: VertexStore, root: int = 0):
    """Raise if parent pointers contain a cycle or a finite-g vertex is detached from ``root``."""
    parent = vs.parent
    n = len(parent)
    # pointer jumping: after ceil(log2 n) doublings every chain has reached its root
    anc = np.where(parent == NO_PARENT, np.arange(n), parent)
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2))))) + 1):
        anc = anc[anc]
    roots = anc
    is_root = parent[roots] == NO_PARENT
    if not np.all(is_root):
        bad = int(np.flatnonzero(~is_root)[0])
        raise GraphCorruptionError(f"cycle in parent pointers reachable from vertex {bad}")
    finite = np.isfinite(vs.g)
    if np.any(finite & (roots != root)):
        bad = int(np.flatnonzero(finite & (roots != root))[0])
        raise GraphCorruptionError(f"vertex {bad} has finite g but is not rooted at {root}")
