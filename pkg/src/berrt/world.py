"""Planar polygonal worlds: sampling, collision checking, costs and spatial lookup."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import shapely
from shapely.geometry import Polygon

DEFAULT_REJECTION_BUDGET = 10**6


class State(NamedTuple):
    x: float
    y: float


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DegenerateWorldError(RuntimeError):
    pass


@dataclass
class World:
    bounds: tuple[float, float, float, float]
    obstacles: list[np.ndarray]
    x_init: State
    x_goal: State
    _blocked: object = field(init=False, repr=False)

    def __post_init__(self):
        self.bounds = tuple(float(v) for v in self.bounds)
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax) or not all(map(math.isfinite, self.bounds)):
            raise ScenarioError("bounds", f"degenerate rectangle {self.bounds}")
        polys = []
        for i, poly in enumerate(self.obstacles):
            arr = np.asarray(poly, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
                raise ScenarioError(f"obstacles[{i}]", "needs at least 3 [x, y] vertices")
            if not np.all(np.isfinite(arr)):
                raise ScenarioError(f"obstacles[{i}]", "non-finite coordinate")
            if not shapely.is_valid(Polygon(arr)):
                raise ScenarioError(f"obstacles[{i}]", "polygon is not simple")
            polys.append(arr)
        self.obstacles = polys
        self._blocked = shapely.union_all([Polygon(p) for p in polys]) if polys else None
        if self._blocked is not None:
            shapely.prepare(self._blocked)
        for name, key in (("x_init", "init"), ("x_goal", "goal")):
            s = State(*map(float, getattr(self, name)))
            if not (math.isfinite(s.x) and math.isfinite(s.y)):
                raise ScenarioError(key, "non-finite coordinate")
            if not self.in_bounds(np.array(s)) or self.in_obstacle(np.array(s)):
                raise ScenarioError(key, f"{tuple(s)} is not in free space")
            setattr(self, name, s)

    @property
    def area(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return (xmax - xmin) * (ymax - ymin)

    def in_bounds(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        xmin, ymin, xmax, ymax = self.bounds
        return (
            (pts[..., 0] >= xmin) & (pts[..., 0] <= xmax)
            & (pts[..., 1] >= ymin) & (pts[..., 1] <= ymax)
        )

    def in_obstacle(self, pts) -> np.ndarray:
        """Closed-set containment: points on an obstacle boundary count as inside."""
        pts = np.asarray(pts, dtype=float)
        if self._blocked is None:
            return np.zeros(pts.shape[:-1], dtype=bool)
        return shapely.intersects_xy(self._blocked, pts[..., 0], pts[..., 1])

    def free_area(self, resolution: int = 200) -> float:
        """Free-space area estimated on a fixed lattice (deterministic)."""
        xmin, ymin, xmax, ymax = self.bounds
        if not self.obstacles:
            return self.area
        xs = xmin + (np.arange(resolution) + 0.5) * (xmax - xmin) / resolution
        ys = ymin + (np.arange(resolution) + 0.5) * (ymax - ymin) / resolution
        grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
        free = int((~self.in_obstacle(grid)).sum())
        return self.area * free / len(grid)


def load_scenario(path) -> World:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("<document>", f"invalid JSON: {exc}") from exc
    return world_from_dict(doc)


def world_from_dict(doc: dict) -> World:
    if not isinstance(doc, dict):
        raise ScenarioError("<document>", "top level must be an object")
    for key in ("bounds", "obstacles", "init", "goal"):
        if key not in doc:
            raise ScenarioError(key, "missing")
    b = doc["bounds"]
    if not isinstance(b, dict):
        raise ScenarioError("bounds", "must be an object with xmin, ymin, xmax, ymax")
    try:
        bounds = tuple(float(b[k]) for k in ("xmin", "ymin", "xmax", "ymax"))
    except KeyError as exc:
        raise ScenarioError(f"bounds.{exc.args[0]}", "missing") from None
    except (TypeError, ValueError):
        raise ScenarioError("bounds", "coordinates must be numbers") from None
    if not isinstance(doc["obstacles"], list):
        raise ScenarioError("obstacles", "must be a list of vertex loops")
    obstacles = []
    for i, loop in enumerate(doc["obstacles"]):
        try:
            arr = np.asarray(loop, dtype=float)
        except (TypeError, ValueError):
            raise ScenarioError(f"obstacles[{i}]", "vertices must be [x, y] numbers") from None
        obstacles.append(arr)
    points = {}
    for key in ("init", "goal"):
        pt = doc[key]
        if not (isinstance(pt, (list, tuple)) and len(pt) == 2):
            raise ScenarioError(key, "must be [x, y]")
        try:
            points[key] = State(float(pt[0]), float(pt[1]))
        except (TypeError, ValueError):
            raise ScenarioError(key, "coordinates must be numbers") from None
    return World(bounds, obstacles, points["init"], points["goal"])


def world_to_dict(w: World) -> dict:
    xmin, ymin, xmax, ymax = w.bounds
    return {
        "bounds": {"xmin": xmin, "ymin": ymin, "xmax": xmax, "ymax": ymax},
        "obstacles": [p.tolist() for p in w.obstacles],
        "init": list(w.x_init),
        "goal": list(w.x_goal),
    }


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``empty`` or ``cluttered``)."""
    path = Path(__file__).with_name("scenarios") / f"{name}.json"
    if not path.exists():
        known = sorted(p.stem for p in path.parent.glob("*.json"))
        raise FileNotFoundError(f"no bundled scenario {name!r} (have {', '.join(known)})")
    return path


def cost(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.hypot(b[0] - a[0], b[1] - a[1]))


def costs_from(a, pts) -> np.ndarray:
    """Vectorized ``cost(a, p)`` for each row ``p`` of ``pts``; bitwise equal to ``cost``."""
    pts = np.asarray(pts, dtype=float)
    return np.hypot(pts[..., 0] - a[0], pts[..., 1] - a[1])


def heuristic(v, w: World) -> float:
    return cost(v, w.x_goal)


def segment_collides(a, b, w: World) -> bool:
    return bool(segments_collide(np.asarray(a, float), np.asarray(b, float)[None], w)[0])


def segments_collide(a, bs, w: World) -> np.ndarray:
    """Collision flags for the segments ``a -> bs[i]``.

    Grazing an obstacle vertex or edge counts as a collision, as does leaving
    the bounds.
    """
    a = np.asarray(a, dtype=float)
    bs = np.asarray(bs, dtype=float).reshape(-1, 2)
    starts = np.broadcast_to(a, bs.shape)
    out = ~(w.in_bounds(starts) & w.in_bounds(bs))
    if w._blocked is None or not len(bs):
        return out
    lines = shapely.linestrings(np.stack([starts, bs], axis=1))
    return out | shapely.intersects(w._blocked, lines)


def sample_free(rng: np.random.Generator, w: World, budget: int = DEFAULT_REJECTION_BUDGET) -> State:
    xmin, ymin, xmax, ymax = w.bounds
    for _ in range(budget):
        x = xmin + (xmax - xmin) * rng.random()
        y = ymin + (ymax - ymin) * rng.random()
        if not w.obstacles or not w.in_obstacle(np.array([x, y])):
            return State(x, y)
    raise DegenerateWorldError(f"no free sample after {budget} attempts")


class SpatialIndex:
    """Uniform grid buckets over inserted points; ids are insertion order."""

    def __init__(self, cell_size: float, origin=(0.0, 0.0)):
        if not cell_size > 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.origin = (float(origin[0]), float(origin[1]))
        self._pts = np.empty((64, 2))
        self._n = 0
        self._cells: dict[tuple[int, int], list[int]] = {}
        self._lo = None
        self._hi = None

    def __len__(self):
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._pts[: self._n]

    def _cell(self, x, y):
        return (
            math.floor((x - self.origin[0]) / self.cell_size),
            math.floor((y - self.origin[1]) / self.cell_size),
        )

    def insert(self, s) -> int:
        if self._n == len(self._pts):
            self._pts = np.concatenate([self._pts, np.empty_like(self._pts)])
        i = self._n
        self._pts[i] = s
        self._n += 1
        c = self._cell(float(s[0]), float(s[1]))
        self._cells.setdefault(c, []).append(i)
        if self._lo is None:
            self._lo, self._hi = list(c), list(c)
        else:
            self._lo = [min(self._lo[0], c[0]), min(self._lo[1], c[1])]
            self._hi = [max(self._hi[0], c[0]), max(self._hi[1], c[1])]
        return i

    def _ring(self, c, k):
        cx, cy = c
        if k == 0:
            yield c
            return
        for dx in range(-k, k + 1):
            yield (cx + dx, cy - k)
            yield (cx + dx, cy + k)
        for dy in range(-k + 1, k):
            yield (cx - k, cy + dy)
            yield (cx + k, cy + dy)

    def nearest(self, x) -> int:
        if self._n == 0:
            raise LookupError("nearest() on an empty index")
        c = self._cell(float(x[0]), float(x[1]))
        max_ring = max(
            abs(c[0] - self._lo[0]), abs(c[0] - self._hi[0]),
            abs(c[1] - self._lo[1]), abs(c[1] - self._hi[1]),
        )
        best_d, best_i = math.inf, -1
        for k in range(max_ring + 1):
            ids = [i for cell in self._ring(c, k) for i in self._cells.get(cell, ())]
            if ids:
                ids = np.array(sorted(ids))
                d = costs_from(x, self._pts[ids])
                j = int(np.argmin(d))
                if d[j] < best_d or (d[j] == best_d and ids[j] < best_i):
                    best_d, best_i = float(d[j]), int(ids[j])
            # points in ring k+1 and beyond are at least k * cell_size away
            if best_d < k * self.cell_size:
                break
        return best_i

    def near(self, x, r: float) -> np.ndarray:
        """Sorted ids of all points within distance ``r`` (inclusive)."""
        if self._n == 0:
            return np.empty(0, dtype=np.int64)
        lo = self._cell(float(x[0]) - r, float(x[1]) - r)
        hi = self._cell(float(x[0]) + r, float(x[1]) + r)
        lo = (max(lo[0], self._lo[0]), max(lo[1], self._lo[1]))
        hi = (min(hi[0], self._hi[0]), min(hi[1], self._hi[1]))
        ids = []
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                ids.extend(self._cells.get((cx, cy), ()))
        if not ids:
            return np.empty(0, dtype=np.int64)
        ids = np.array(sorted(ids), dtype=np.int64)
        return ids[costs_from(x, self._pts[ids]) <= r]
