"""Extend, serial policy iteration, and the batched planning loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    NO_PARENT, CsrGraph, EdgeBatch, VertexStore, add_vertex, append_edges,
    check_policy_forest,
)
from .kernels import (
    CHILD_TEST, GOAL, INIT, ChildIndex, evaluate_level, improve_rows, improve_set,
    is_promising,
)
from .parallel import ParallelBackend, StagingBuffer, sync_and_rebuild
from .world import SpatialIndex, State, World, costs_from, heuristic, sample_free, segments_collide

BACKENDS = ("serial", "parallel")


class ConvergenceError(RuntimeError):
    pass


@dataclass
class PlannerConfig:
    n_samples: int = 1000
    batch_size: int = 1
    epsilon: float = 1e-6
    steer_range: float | None = None
    gamma: float | None = None
    seed: int = 0
    backend: str = "serial"
    workers: int | None = None
    validate: bool = False
    promising_test: str = CHILD_TEST
    improve_neighbors: bool = True

    def __post_init__(self):
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")
        if not 1 <= self.batch_size:
            raise ValueError("batch_size must be >= 1")
        if self.n_samples and self.batch_size > self.n_samples:
            raise ValueError("batch_size must not exceed n_samples")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.steer_range is not None and not self.steer_range > 0:
            raise ValueError("steer_range must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")


def default_steer_range(world: World) -> float:
    xmin, ymin, xmax, ymax = world.bounds
    return 0.1 * math.hypot(xmax - xmin, ymax - ymin)


def default_gamma(world: World) -> float:
    # planar connectivity bound: 2 (1 + 1/d)^(1/d) (mu_free / zeta_d)^(1/d), d = 2
    return 2.0 * math.sqrt(1.5) * math.sqrt(world.free_area() / math.pi)


def near_radius(n: int, gamma: float, steer_range: float) -> float:
    if n < 2:
        return steer_range
    return min(gamma * math.sqrt(math.log(n) / n), steer_range)


@dataclass
class ReplanStats:
    iterations: int = 0
    delta_g_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    rebuild_time: float = 0.0
    g_goal: float = math.inf


@dataclass
class Graph:
    """Everything the planner mutates during a run."""

    vertices: VertexStore
    edges: EdgeBatch
    index: SpatialIndex
    staging: StagingBuffer
    csr: CsrGraph
    B: set = field(default_factory=set)


@dataclass
class PlanResult:
    path: list
    path_cost: float
    per_replan: list
    totals: dict
    graph: Graph

    @property
    def g_goal(self) -> float:
        return float(self.graph.vertices.g[GOAL])


@dataclass
class ExtendResult:
    added: int | None
    promising: bool
    staged_edges: int


class SerialBackend:
    name = "serial"

    def __init__(self, with_neighbors: bool = True, test: str = CHILD_TEST,
                 validate: bool = False):
        self.with_neighbors = with_neighbors
        self.test = test
        self.validate = validate

    def improve(self, csr, vs, B):
        return improve_serial(csr, vs, B, self.with_neighbors)[1]

    def evaluate(self, csr, vs):
        return evaluate_serial(csr, vs, self.test, self.validate)[1]

    def close(self):
        pass


def make_backend(cfg: PlannerConfig):
    if cfg.backend == "serial":
        return SerialBackend(cfg.improve_neighbors, cfg.promising_test, cfg.validate)
    return ParallelBackend(cfg.workers, cfg.improve_neighbors, cfg.promising_test, cfg.validate)


def new_graph(world: World, cell_size: float, validate: bool = False) -> Graph:
    vs = VertexStore()
    index = SpatialIndex(cell_size, origin=world.bounds[:2])
    add_vertex(vs, world.x_init, 0.0, heuristic(world.x_init, world), None)
    index.insert(world.x_init)
    add_vertex(vs, world.x_goal, math.inf, 0.0, None)
    index.insert(world.x_goal)
    edges = EdgeBatch(validate=validate)
    return Graph(vs, edges, index, StagingBuffer(edges), CsrGraph.empty(2))


def extend(graph: Graph, world: World, rng: np.random.Generator, steer_range: float,
           gamma: float) -> ExtendResult:
    """One RRT-style extension plus the local parent choice for the new vertex."""
    vs, index = graph.vertices, graph.index
    x_rand = np.asarray(sample_free(rng, world))
    nearest = index.nearest(x_rand)
    x_near = vs.states[nearest]
    d = float(np.hypot(*(x_rand - x_near)))
    if d == 0.0:
        return ExtendResult(None, False, 0)
    x_new = x_rand if d <= steer_range else x_near + (x_rand - x_near) * (steer_range / d)
    if segments_collide(x_near, x_new[None], world)[0]:
        return ExtendResult(None, False, 0)

    r = near_radius(len(vs) + 1, gamma, steer_range)
    nbrs = np.union1d(index.near(x_new, r), [nearest])
    nbrs = nbrs[~segments_collide(x_new, vs.states[nbrs], world)]
    c = costs_from(x_new, vs.states[nbrs])
    through = vs.g[nbrs] + c
    j = int(np.argmin(through))
    if np.isfinite(through[j]):
        parent, g_new, pc = int(nbrs[j]), float(through[j]), float(c[j])
    else:
        parent, g_new, pc = None, math.inf, math.inf
    h_new = heuristic(x_new, world)
    promising = is_promising(g_new, h_new, vs.g[GOAL])
    vid = add_vertex(vs, x_new, g_new, h_new, parent, pc, promising)
    index.insert(x_new)
    k = len(nbrs)
    src = np.empty(2 * k, dtype=np.int64)
    dst = np.empty(2 * k, dtype=np.int64)
    src[0::2], dst[0::2] = nbrs, vid
    src[1::2], dst[1::2] = vid, nbrs
    append_edges(graph.edges, (src, dst, np.repeat(c, 2)))
    if promising:
        graph.B.add(vid)
    return ExtendResult(vid, promising, 2 * k)


def improve_serial(csr: CsrGraph, vs: VertexStore, B, with_neighbors: bool = True):
    """Jacobi parent relaxation; returns ``(parent, delta_g)``. ``g`` is not written."""
    rows, trusted = improve_set(csr, B, len(vs), with_neighbors)
    upd, par, pc, delta = improve_rows(csr, vs.g, rows, trusted, vs.h)
    vs.parent[upd] = par
    vs.parent_cost[upd] = pc
    return vs.parent, delta


def evaluate_serial(csr: CsrGraph, vs: VertexStore, test: str = CHILD_TEST,
                    validate: bool = False):
    """Truncated breadth-first walk of the policy tree from x_init; returns ``(g, B)``.

    The goal-cost threshold is read once per tree level.
    """
    if validate:
        check_policy_forest(vs, INIT)
    g, h, parent, parent_cost = vs.g, vs.h, vs.parent, vs.parent_cost
    children = ChildIndex(parent)
    frontier = np.array([INIT], dtype=np.int64)
    levels = []
    while len(frontier):
        frontier = evaluate_level(children, g, h, parent, parent_cost, frontier,
                                  float(g[GOAL]), test)
        levels.append(frontier)
    B = np.sort(np.concatenate(levels)) if levels else np.empty(0, dtype=np.int64)
    vs.promising[:] = False
    vs.promising[B] = True
    return g, B


def replan(csr: CsrGraph, vs: VertexStore, B, backend, epsilon: float,
           max_iterations: int | None = None):
    """Alternate Improve and Evaluate until the largest improvement drops below epsilon."""
    cap = max_iterations if max_iterations is not None else 10 * len(vs)
    B = np.asarray(sorted(B) if isinstance(B, set) else B, dtype=np.int64)
    stats = ReplanStats()
    t0 = time.perf_counter()
    while True:
        if stats.iterations >= cap:
            raise ConvergenceError(f"replan exceeded {cap} policy iterations")
        delta = backend.improve(csr, vs, B)
        stats.iterations += 1
        stats.delta_g_trace.append(delta)
        if delta < epsilon:
            if delta > 0:
                # parents moved by less than epsilon; bring g in line with them
                B = backend.evaluate(csr, vs)
            break
        B = backend.evaluate(csr, vs)
    stats.wall_time = time.perf_counter() - t0
    stats.g_goal = float(vs.g[GOAL])
    return B, stats


def extract_path(vs: VertexStore, goal: int = GOAL) -> list:
    if not np.isfinite(vs.g[goal]):
        return []
    chain = [goal]
    while vs.parent[chain[-1]] != NO_PARENT:
        chain.append(int(vs.parent[chain[-1]]))
        if len(chain) > len(vs):
            raise RuntimeError("parent chain longer than the vertex count")
    if chain[-1] != INIT:
        return []
    return [State(*map(float, vs.states[v])) for v in reversed(chain)]


def path_cost(path) -> float:
    if not path:
        return math.inf
    pts = np.asarray(path, dtype=float)
    return float(np.sum(np.hypot(*(pts[1:] - pts[:-1]).T)))


class _Run:
    """Shared setup and exploitation step for the planning loops."""

    def __init__(self, world: World, cfg: PlannerConfig, backend=None, observer=None):
        self.world, self.cfg = world, cfg
        self.observer = observer
        self.steer = cfg.steer_range or default_steer_range(world)
        self.gamma = cfg.gamma or default_gamma(world)
        cell = max(near_radius(max(cfg.n_samples, 2), self.gamma, self.steer), 1e-9)
        self.graph = new_graph(world, cell, cfg.validate)
        self.rng = np.random.default_rng(cfg.seed)
        self.backend = backend or make_backend(cfg)
        self.per_replan = []
        self.t_explore = self.t_exploit = self.t_rebuild = 0.0

    def extend(self):
        t0 = time.perf_counter()
        out = extend(self.graph, self.world, self.rng, self.steer, self.gamma)
        self.t_explore += time.perf_counter() - t0
        return out

    def replan(self):
        gr = self.graph
        t0 = time.perf_counter()
        gr.csr = sync_and_rebuild(gr.staging, gr.csr, len(gr.vertices), self.cfg.validate)
        t1 = time.perf_counter()
        B, stats = replan(gr.csr, gr.vertices, gr.B, self.backend, self.cfg.epsilon)
        stats.rebuild_time = t1 - t0
        gr.B = set(B.tolist())
        self.t_rebuild += stats.rebuild_time
        self.t_exploit += stats.wall_time
        self.per_replan.append(stats)
        if self.cfg.validate:
            check_policy_forest(gr.vertices, INIT)
        if self.observer is not None:
            self.observer(gr, stats)

    def finish(self, t_start) -> PlanResult:
        total = time.perf_counter() - t_start
        if self.backend is not None:
            self.backend.close()
        path = extract_path(self.graph.vertices)
        return PlanResult(
            path=path,
            path_cost=path_cost(path),
            per_replan=self.per_replan,
            totals={"explore": self.t_explore, "exploit": self.t_exploit,
                    "rebuild": self.t_rebuild, "total": total},
            graph=self.graph,
        )


def plan(world: World, cfg: PlannerConfig, backend=None, observer=None) -> PlanResult:
    """Batched-extension planning: ``batch_size`` extensions between replans.

    A final replan always runs over the complete graph. ``observer(graph, stats)``
    is called after every replan.
    """
    t_start = time.perf_counter()
    run = _Run(world, cfg, backend, observer)
    S = cfg.batch_size
    for k in range(math.ceil(cfg.n_samples / S)):
        before = len(run.graph.B)
        for _ in range(min(S, cfg.n_samples - k * S)):
            run.extend()
        if len(run.graph.B) > before:
            run.replan()
    run.replan()
    return run.finish(t_start)


def pirrt(world: World, cfg: PlannerConfig, backend=None, final_replan: bool = True,
          observer=None) -> PlanResult:
    """Unbatched reference loop: replan after every extension that grows B."""
    t_start = time.perf_counter()
    run = _Run(world, cfg, backend, observer)
    for _ in range(cfg.n_samples):
        before = len(run.graph.B)
        run.extend()
        if len(run.graph.B) > before:
            run.replan()
    if final_replan:
        run.replan()
    return run.finish(t_start)
