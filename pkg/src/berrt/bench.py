"""Seeded trial matrices over (N, S, backend), summaries and CSV/JSON records."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import statistics
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .planner import BACKENDS, PlannerConfig, plan
from .world import World, bundled_scenario, load_scenario

# Reference S=100 vs S=1 total-time speedups at N=10^4, reported next to measured ones.
REFERENCE_BATCH_SPEEDUP = {"serial": 8.83, "parallel": 9.52}
REFERENCE_N, REFERENCE_S = 10_000, 100

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, n: int, s: int, backend: str, trial: int) -> int:
    """Fold each cell coordinate into the base seed with one splitmix64 round apiece."""
    h = splitmix64(base & _MASK64)
    for part in (n, s, BACKENDS.index(backend), trial):
        h = splitmix64(h ^ (part & _MASK64))
    return h


@dataclass
class TrialSpec:
    scenario: str
    samples: list
    batches: list
    backends: list = field(default_factory=lambda: ["serial"])
    trials: int = 5
    seed: int = 0
    epsilon: float = 1e-6
    workers: int | None = None
    validate: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.samples or not self.batches or not self.backends:
            raise ValueError("samples, batches and backends must be nonempty")
        for b in self.backends:
            if b not in BACKENDS:
                raise ValueError(f"unknown backend {b!r}; choose from {BACKENDS}")
        if any(n < 1 for n in self.samples) or any(s < 1 for s in self.batches):
            raise ValueError("sample and batch sizes must be >= 1")


@dataclass
class RunRecord:
    scenario: str
    n_samples: int
    batch_size: int
    backend: str
    workers: int
    trial: int
    seed: int
    status: str = "ok"
    message: str = ""
    path_cost: float = math.inf
    n_vertices: int = 0
    n_edges: int = 0
    n_replans: int = 0
    pi_iterations: int = 0
    max_pi_iterations: int = 0
    t_explore: float = 0.0
    t_exploit: float = 0.0
    t_rebuild: float = 0.0
    t_total: float = 0.0
    replan_times: list = field(default_factory=list)
    replan_iterations: list = field(default_factory=list)
    g_goal_trace: list = field(default_factory=list)


COLUMNS = [f.name for f in dataclasses.fields(RunRecord)]
_LISTS = {"replan_times": float, "replan_iterations": int, "g_goal_trace": float}
_TYPES = {f.name: f.type for f in dataclasses.fields(RunRecord)}


def resolve_scenario(name_or_path: str) -> World:
    p = Path(name_or_path)
    if not p.exists() and not p.suffix:
        p = bundled_scenario(name_or_path)
    return load_scenario(p)


def run_one(world: World, scenario: str, n: int, s: int, backend: str, trial: int,
            spec: TrialSpec) -> RunRecord:
    seed = derive_seed(spec.seed, n, s, backend, trial)
    workers = spec.workers or 0
    rec = RunRecord(scenario, n, s, backend, workers, trial, seed)
    if s > n:
        rec.status = "skipped"
        rec.message = f"batch size {s} exceeds sample count {n}"
        warnings.warn(rec.message)
        return rec
    cfg = PlannerConfig(n_samples=n, batch_size=s, epsilon=spec.epsilon, seed=seed,
                        backend=backend, workers=spec.workers, validate=spec.validate)
    res = plan(world, cfg)
    rec.path_cost = res.path_cost
    rec.n_vertices = len(res.graph.vertices)
    rec.n_edges = len(res.graph.edges)
    rec.n_replans = len(res.per_replan)
    rec.replan_iterations = [st.iterations for st in res.per_replan]
    rec.pi_iterations = sum(rec.replan_iterations)
    rec.max_pi_iterations = max(rec.replan_iterations, default=0)
    rec.replan_times = [st.wall_time for st in res.per_replan]
    rec.g_goal_trace = [st.g_goal for st in res.per_replan]
    rec.t_explore = res.totals["explore"]
    rec.t_exploit = res.totals["exploit"]
    rec.t_rebuild = res.totals["rebuild"]
    rec.t_total = res.totals["total"]
    return rec


def run_matrix(spec: TrialSpec, progress=None) -> list[RunRecord]:
    """One record per (N, S, backend, trial), run sequentially."""
    world = resolve_scenario(spec.scenario)
    out = []
    for n in spec.samples:
        for s in spec.batches:
            for backend in spec.backends:
                for trial in range(spec.trials):
                    rec = run_one(world, spec.scenario, n, s, backend, trial, spec)
                    out.append(rec)
                    if progress:
                        progress(rec)
    return out


def _mean_std(xs):
    xs = list(xs)
    if not all(map(math.isfinite, xs)):
        # an unsolved trial has infinite cost; the spread is undefined
        return statistics.fmean(xs), (0.0 if len(set(xs)) == 1 else math.nan)
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def summarize(records) -> list[dict]:
    """Per-cell mean and standard deviation plus speedups against S=1 and serial."""
    cells: dict[tuple, list] = {}
    for r in records:
        if r.status == "ok":
            cells.setdefault((r.scenario, r.n_samples, r.batch_size, r.backend), []).append(r)
    rows = {}
    for key, rs in sorted(cells.items()):
        row = dict(zip(("scenario", "n_samples", "batch_size", "backend"), key))
        row["trials"] = len(rs)
        row["solved"] = sum(math.isfinite(r.path_cost) for r in rs)
        for col, attr in (("total", "t_total"), ("exploit", "t_exploit"),
                          ("path_cost", "path_cost")):
            row[f"{col}_mean"], row[f"{col}_std"] = _mean_std(getattr(r, attr) for r in rs)
        rows[key] = row
    for (sc, n, s, b), row in rows.items():
        base = rows.get((sc, n, 1, b))
        row["speedup_vs_batch1"] = (base["total_mean"] / row["total_mean"]
                                    if base and row["total_mean"] > 0 else math.nan)
        ser = rows.get((sc, n, s, "serial"))
        row["speedup_vs_serial"] = (ser["total_mean"] / row["total_mean"]
                                    if ser and row["total_mean"] > 0 else math.nan)
        row["reference_batch_speedup"] = (REFERENCE_BATCH_SPEEDUP[b]
                                          if (n, s) == (REFERENCE_N, REFERENCE_S) else math.nan)
    return list(rows.values())


def crossover(summary) -> dict:
    """Smallest N at which the parallel mean first beats serial, per (scenario, S); None if never."""
    by = {}
    for row in summary:
        by.setdefault((row["scenario"], row["batch_size"]), {}).setdefault(
            row["n_samples"], {})[row["backend"]] = row["total_mean"]
    out = {}
    for key, per_n in sorted(by.items()):
        out[key] = None
        for n in sorted(per_n):
            t = per_n[n]
            if "serial" in t and "parallel" in t and t["parallel"] < t["serial"]:
                out[key] = n
                break
    return out


def _cell(value):
    if isinstance(value, list):
        return " ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return value


def _parse(name, text):
    if name in _LISTS:
        return [_LISTS[name](t) for t in text.split()]
    kind = _TYPES[name]
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def _open(path):
    if hasattr(path, "write"):
        return path, False
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def emit(records, fmt: str, path=None):
    """Write records as CSV (header plus one row each, columns in COLUMNS order) or a JSON array."""
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    fh, close = _open(path)
    try:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in records:
                w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        else:
            # inf is written as the bare token Infinity, which json.loads reads back
            json.dump([dataclasses.asdict(r) for r in records], fh, indent=1)
            fh.write("\n")
    finally:
        if close:
            fh.close()


def read_records(path, fmt: str) -> list[RunRecord]:
    with open(path, newline="") as fh:
        if fmt == "json":
            return [RunRecord(**d) for d in json.load(fh)]
        reader = csv.DictReader(fh)
        return [RunRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in reader]


def emit_summary(summary, path=None):
    fh, close = _open(path)
    try:
        if summary:
            w = csv.DictWriter(fh, fieldnames=list(summary[0]), lineterminator="\n")
            w.writeheader()
            w.writerows({k: _cell(v) for k, v in row.items()} for row in summary)
    finally:
        if close:
            fh.close()
