"""berrt-bench: run a seeded benchmark matrix and write per-run records."""

from __future__ import annotations

import argparse
import sys

from . import bench
from .graph import GraphCorruptionError
from .parallel import WORKERS_ENV
from .planner import BACKENDS, ConvergenceError
from .world import DegenerateWorldError, ScenarioError


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _backend_list(text: str) -> list[str]:
    names = [t for t in text.split(",") if t]
    for n in names:
        if n not in BACKENDS:
            raise argparse.ArgumentTypeError(f"unknown backend {n!r}; choose from {BACKENDS}")
    return names


def _flatten(groups):
    return [x for g in groups for x in g]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="berrt-bench", description=__doc__)
    p.add_argument("--scenario", required=True,
                   help="scenario JSON file, or a bundled name (empty, cluttered)")
    p.add_argument("--samples", type=_int_list, nargs="+", required=True,
                   help="sample counts N, space- or comma-separated")
    p.add_argument("--batch", type=_int_list, nargs="+", default=[[1]],
                   help="batch sizes S (default 1)")
    p.add_argument("--backend", type=_backend_list, nargs="+", default=[["serial"]],
                   help="serial and/or parallel (default serial)")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="base seed (unsigned 64-bit)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=None,
                   help=f"parallel worker count (default ${WORKERS_ENV} or the CPU count)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--summary", default=None,
                   help="also write the per-cell summary CSV to this path ('-' for stderr)")
    p.add_argument("--validate", action="store_true",
                   help="enable all validation-mode invariant checks")
    p.add_argument("--quiet", action="store_true", help="no progress lines on stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise ValueError("--seed must fit in an unsigned 64-bit integer")
        if args.workers is not None and args.workers < 1:
            raise ValueError("--workers must be >= 1")
        if not args.epsilon >= 0:
            raise ValueError("--epsilon must be nonnegative")
        spec = bench.TrialSpec(
            scenario=args.scenario,
            samples=_flatten(args.samples),
            batches=_flatten(args.batch),
            backends=_flatten(args.backend),
            trials=args.trials,
            seed=args.seed,
            epsilon=args.epsilon,
            workers=args.workers,
            validate=args.validate,
        )

        def progress(r):
            if not args.quiet:
                print(f"N={r.n_samples} S={r.batch_size} {r.backend} trial={r.trial} "
                      f"{r.status} cost={r.path_cost:.6g} total={r.t_total:.3f}s",
                      file=sys.stderr)

        records = bench.run_matrix(spec, progress)
        bench.emit(records, args.format, args.out)
        if args.summary:
            summary = bench.summarize(records)
            if args.summary == "-":
                bench.emit_summary(summary, sys.stderr)
            else:
                bench.emit_summary(summary, args.summary)
            for (sc, s), n0 in bench.crossover(summary).items():
                if n0 is not None and not args.quiet:
                    print(f"crossover {sc} S={s}: parallel first faster at N={n0}",
                          file=sys.stderr)
    except (ScenarioError, DegenerateWorldError, ConvergenceError, GraphCorruptionError,
            ValueError, OSError) as exc:
        print(f"berrt-bench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
