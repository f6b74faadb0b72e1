"""Command-line entry point.

Subcommands: ``run`` (repeated runs of one configuration), ``grid`` (the
(A, b) grid search, resumable at cell granularity), ``theory`` (exact-formula
tables), ``trace`` (per-iteration logs plus their aggregate), and ``fraction``
(better-than-baseline curves from a grid CSV).

Exit codes: 0 success, 2 usage error, 3 resume metadata mismatch, 4 size
guard tripped.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, experiments, formats, theory
from .algorithms import (
    EA_ALPHA,
    EA_GT0,
    RLS,
    RLS_OPT_LO,
    RLS_OPT_OM,
    AlgorithmConfig,
    ConfigurationError,
)
from .core import LEADINGONES, ONEMAX
from .experiments import CellStats, GridSpec

EXIT_USAGE = 2
EXIT_RESUME_MISMATCH = 3
EXIT_SIZE_GUARD = 4

ALGO_CHOICES = (RLS, RLS_OPT_OM, RLS_OPT_LO, EA_GT0, EA_ALPHA)
THEORY_TABLES = ("kopt-om", "kopt-lo", "drift-om", "prob-lo",
                 "fixed-target-lo", "rls-lo")
TRACE_RUN_LIMIT = 1000


class UsageError(Exception):
    pass


class ResumeMismatchError(Exception):
    pass


class SizeGuardError(Exception):
    pass


def _parse_rate(text: str | None, n: int) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if text == "1/n":
        return 1.0 / n
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"cannot parse rate {text!r} (use a float or '1/n')")


def _parse_float_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"expected MIN:MAX:STEP, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"expected numeric MIN:MAX:STEP, got {text!r}")
    return lo, hi, step


def _parse_int_span(text: str | None, default: tuple[int, int]) -> range:
    if text is None:
        lo, hi = default
        return range(lo, hi + 1)
    parts = text.split(":")
    try:
        if len(parts) == 1:
            value = int(parts[0])
            return range(value, value + 1)
        if len(parts) == 2:
            return range(int(parts[0]), int(parts[1]) + 1)
    except ValueError:
        pass
    raise UsageError(f"expected INT or LO:HI, got {text!r}")


def _parse_thresholds(text: str) -> list[float]:
    if ":" in text:
        lo, hi, step = _parse_float_range(text)
        out = []
        k = 0
        while True:
            value = round(lo + k * step, 10)
            if value > hi + 1e-9:
                break
            out.append(value)
            k += 1
        return out
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse thresholds {text!r}")


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("EVOCTRL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"EVOCTRL_THREADS is not an integer: {env!r}")
    return os.cpu_count() or 1


def _base_metadata(command: str) -> dict:
    return {"tool": "evoctrl", "version": __version__, "command": command}


def _build_config(args) -> tuple[AlgorithmConfig, float | None]:
    """Validate algorithm flags and return (config, resolved p0)."""
    algo = args.algo
    p0 = _parse_rate(args.p0, args.n)
    if algo in (RLS, RLS_OPT_OM, RLS_OPT_LO):
        if args.p0 is not None or args.A is not None or args.b is not None:
            raise UsageError(f"--p0/--A/--b do not apply to {algo}")
        return AlgorithmConfig(variant=algo, budget=args.budget), None
    if algo == EA_GT0:
        if args.A is not None or args.b is not None:
            raise UsageError("--A/--b only apply to ea-alpha")
        resolved = 1.0 / args.n if p0 is None else p0
        return AlgorithmConfig(variant=algo, p0=resolved,
                               budget=args.budget), resolved
    if args.A is None or args.b is None:
        raise UsageError("ea-alpha requires both --A and --b")
    resolved = 1.0 / args.n if p0 is None else p0
    try:
        config = AlgorithmConfig(variant=algo, p0=resolved, A=args.A,
                                 b=args.b, budget=args.budget)
    except ConfigurationError as exc:
        raise UsageError(str(exc))
    return config, resolved


def cmd_run(args) -> int:
    config, p0 = _build_config(args)
    threads = _resolve_threads(args.threads)
    summary = experiments.repeat_runs(
        config, args.problem, args.n, args.runs, args.seed,
        threads=threads, keep_records=args.per_run is not None)
    is_ea = args.algo in (EA_GT0, EA_ALPHA)
    metadata = _base_metadata("run")
    metadata.update({
        "problem": args.problem, "n": args.n, "algo": args.algo,
        "runs": args.runs, "seed": args.seed,
        "p0": p0 if is_ea else None,
        "A": args.A if args.algo == EA_ALPHA else None,
        "b": args.b if args.algo == EA_ALPHA else None,
        "budget": config.resolved_budget(args.n),
    })
    header = ["algo", "problem", "n", "A", "b", "p0", "runs", "mean",
              "median", "stddev", "min", "max", "budget_exceeded"]
    row = [args.algo, args.problem, args.n,
           args.A if args.algo == EA_ALPHA else None,
           args.b if args.algo == EA_ALPHA else None,
           p0 if is_ea else None,
           summary.runs, summary.mean, summary.median, summary.stddev,
           summary.min_evals, summary.max_evals, summary.budget_exceeded]
    formats.write_csv(args.output, metadata, header, [row])
    if args.per_run is not None:
        per_rows = [
            [i, rec.evaluations_to_optimum, rec.total_evaluations]
            for i, rec in enumerate(summary.records)
        ]
        formats.write_csv(args.per_run, metadata,
                          ["run", "evaluations_to_optimum",
                           "total_evaluations"], per_rows)
    return 0


_GRID_HEADER = ["A", "b", "runs", "mean", "median", "stddev", "min", "max",
                "budget_exceeded_count"]


def _grid_metadata(spec: GridSpec, args) -> dict:
    metadata = _base_metadata("grid")
    metadata.update({
        "problem": spec.problem, "n": spec.n,
        "A_range": "%s:%s:%s" % spec.A_range,
        "b_range": "%s:%s:%s" % spec.b_range,
        "runs_per_cell": spec.runs_per_cell,
        "p0": spec.p0 if spec.p0 is not None else 1.0 / spec.n,
        "seed": spec.master_seed,
        "budget": spec.budget if spec.budget is not None
                  else 100 * spec.n * spec.n,
    })
    return metadata


def _cell_row(c: CellStats) -> list:
    return [c.A, c.b, c.runs, c.mean, c.median, c.stddev, c.min_evals,
            c.max_evals, c.budget_exceeded]


def _parse_grid_rows(rows: list[list[str]]) -> dict[tuple[float, float], CellStats]:
    cells = {}
    for row in rows:
        try:
            stats = CellStats(
                A=float(row[0]), b=float(row[1]), runs=int(row[2]),
                mean=float(row[3]), median=float(row[4]), stddev=float(row[5]),
                min_evals=float(row[6]), max_evals=float(row[7]),
                budget_exceeded=int(row[8]),
            )
        except (ValueError, IndexError):
            continue
        cells[(stats.A, stats.b)] = stats
    return cells


def cmd_grid(args) -> int:
    p0 = _parse_rate(args.p0, args.n)
    spec = GridSpec(
        problem=args.problem, n=args.n,
        A_range=_parse_float_range(args.A_range),
        b_range=_parse_float_range(args.b_range),
        runs_per_cell=args.runs_per_cell, p0=p0,
        master_seed=args.seed, budget=args.budget,
    )
    metadata = _grid_metadata(spec, args)
    precomputed = None
    if args.resume is not None:
        old_meta, old_header, old_rows = formats.read_csv(args.resume)
        want = {k: formats.format_value(v) for k, v in metadata.items()}
        if old_meta != want or old_header != _GRID_HEADER:
            raise ResumeMismatchError(
                f"{args.resume} was produced by a different configuration")
        precomputed = _parse_grid_rows(old_rows)
        expected = {(a, b) for a in spec.A_values() for b in spec.b_values()}
        if (set(precomputed) >= expected
                and os.path.abspath(args.resume) == os.path.abspath(args.output)):
            print(f"grid already complete: {args.output}", file=sys.stderr)
            return 0

    threads = _resolve_threads(args.threads)
    total_cells = len(spec.A_values()) * len(spec.b_values())

    def progress(done: int, total: int) -> None:
        if done == total or done % 50 == 0:
            print(f"\rcells {done}/{total}", end="", file=sys.stderr)
            if done == total:
                print(file=sys.stderr)

    if args.output == "-":
        result = experiments.grid_search(spec, threads=threads,
                                         progress=progress,
                                         precomputed=precomputed)
        formats.write_csv("-", metadata, _GRID_HEADER,
                          (_cell_row(c) for c in result.cells))
    else:
        with formats.IncrementalCsvWriter(args.output, metadata,
                                          _GRID_HEADER) as writer:
            experiments.grid_search(
                spec, threads=threads, progress=progress,
                precomputed=precomputed,
                on_cell=lambda c: writer.write_row(_cell_row(c)))
    return 0


def cmd_theory(args) -> int:
    n = args.n
    table = args.table
    metadata = _base_metadata("theory")
    metadata.update({"table": table, "n": n})
    if table == "kopt-om":
        span = _parse_int_span(args.f, (0, n - 1))
        header = ["f", "kopt"]
        rows = [[f, theory.optimal_step_onemax(n, f)] for f in span]
    elif table == "kopt-lo":
        span = _parse_int_span(args.f, (0, n - 1))
        header = ["f", "kopt"]
        rows = [[f, theory.optimal_step_leadingones(n, f)] for f in span]
    elif table == "drift-om":
        f_span = _parse_int_span(args.f, (0, n - 1))
        ell_span = _parse_int_span(args.ell, (1, n))
        header = ["f", "ell", "drift"]
        rows = [[f, ell, theory.onemax_drift(n, f, ell)]
                for f in f_span for ell in ell_span]
    elif table == "prob-lo":
        f_span = _parse_int_span(args.f, (0, n - 1))
        ell_span = _parse_int_span(args.ell, (1, n))
        header = ["f", "ell", "probability"]
        rows = [[f, ell, theory.lo_improvement_prob(n, f, ell)]
                for f in f_span for ell in ell_span]
    elif table == "fixed-target-lo":
        span = _parse_int_span(args.i, (0, n))
        header = ["i", "expected_evaluations"]
        rows = [[i, theory.fixed_target_time_leadingones(n, i)] for i in span]
    else:  # rls-lo
        header = ["n", "expected_evaluations"]
        rows = [[n, theory.rls_expected_time_leadingones(n)]]
    try:
        formats.write_csv(args.output, metadata, header, rows)
    except ValueError as exc:
        raise UsageError(str(exc))
    return 0


def cmd_trace(args) -> int:
    if args.runs > TRACE_RUN_LIMIT and not args.force:
        raise SizeGuardError(
            f"tracing {args.runs} runs exceeds the {TRACE_RUN_LIMIT}-run "
            "guard; pass --force to override")
    config, p0 = _build_config(args)
    threads = _resolve_threads(args.threads)
    summary = experiments.repeat_runs(
        config, args.problem, args.n, args.runs, args.seed,
        threads=threads, collect_trace=True, keep_records=True)

    def jsonl_records():
        for run_index, rec in enumerate(summary.records):
            tr = rec.trace
            for t in range(len(tr)):
                yield {
                    "run": run_index,
                    "iter": t + 1,
                    "fitness": int(tr.parent_fitness[t]),
                    "ell": int(tr.ell[t]),
                    "p": float(tr.rate[t]),
                    "accepted": bool(tr.accepted[t]),
                }

    formats.write_jsonl(args.jsonl, jsonl_records())

    agg = experiments.aggregate_traces(summary.records)
    if args.problem == LEADINGONES:
        kopt = {f: theory.optimal_step_leadingones(args.n, int(f))
                for f in agg.levels}
    else:
        kopt = {f: theory.optimal_step_onemax(args.n, int(f))
                for f in agg.levels}
    metadata = _base_metadata("trace")
    metadata.update({
        "problem": args.problem, "n": args.n, "algo": args.algo,
        "runs": args.runs, "seed": args.seed, "p0": p0,
        "A": args.A, "b": args.b,
        "budget": config.resolved_budget(args.n),
    })
    rows = [
        [int(f), float(m), kopt[f], int(c)]
        for f, m, c in zip(agg.levels, agg.mean_ell, agg.iteration_counts)
    ]
    formats.write_csv(args.aggregate, metadata,
                      ["fitness", "mean_ell", "kopt", "iteration_count"], rows)
    return 0


def cmd_fraction(args) -> int:
    meta, header, rows = formats.read_csv(args.input)
    for column in ("A", "b", "mean", "budget_exceeded_count"):
        if column not in header:
            raise UsageError(f"input file is missing column {column!r}")
    cells = list(_parse_grid_rows(rows).values())
    if args.baseline == "exact":
        if meta.get("problem") != LEADINGONES:
            raise UsageError(
                "an exact baseline is only defined for leadingones grids; "
                "pass --baseline VALUE")
        n = int(meta["n"])
        baseline = theory.rls_expected_time_leadingones(n)
        baseline_source = "exact-rls-leadingones"
    else:
        try:
            baseline = float(args.baseline)
        except ValueError:
            raise UsageError(f"cannot parse --baseline {args.baseline!r}")
        baseline_source = "explicit"
    thresholds = _parse_thresholds(args.thresholds)

    def in_box(A: float, b: float) -> bool:
        eps = 1e-9
        if args.A_min is not None and A < args.A_min - eps:
            return False
        if args.A_max is not None and A > args.A_max + eps:
            return False
        if args.b_min is not None and b < args.b_min - eps:
            return False
        if args.b_max is not None and b > args.b_max + eps:
            return False
        return True

    try:
        curve = experiments.fraction_better(cells, baseline, thresholds,
                                            cell_filter=in_box)
    except ValueError as exc:
        raise UsageError(str(exc))
    selected = [c for c in cells if in_box(c.A, c.b)]
    metadata = _base_metadata("fraction")
    metadata.update({
        "input": os.path.basename(args.input),
        "baseline": baseline, "baseline_source": baseline_source,
        "A_min": args.A_min, "A_max": args.A_max,
        "b_min": args.b_min, "b_max": args.b_max,
        "cells": len(selected),
    })
    formats.write_csv(args.output, metadata, ["threshold_pct", "fraction"],
                      [[t, frac] for t, frac in curve])
    return 0


def _add_algo_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--problem", required=True, choices=[ONEMAX, LEADINGONES])
    sub.add_argument("--n", required=True, type=int)
    sub.add_argument("--algo", required=True, choices=ALGO_CHOICES)
    sub.add_argument("--runs", required=True, type=int)
    sub.add_argument("--seed", required=True, type=int)
    sub.add_argument("--p0", help="initial mutation rate (float or '1/n')")
    sub.add_argument("--A", type=float, help="rate increase factor (ea-alpha)")
    sub.add_argument("--b", type=float, help="rate decrease factor (ea-alpha)")
    sub.add_argument("--budget", type=int,
                     help="evaluation budget (default 100*n^2)")
    sub.add_argument("--threads", type=int,
                     help="worker threads (default: EVOCTRL_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoctrl",
        description="Benchmark suite for self-adjusting (1+1)-type "
                    "mutation-rate control on OneMax and LeadingOnes.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="repeated runs of one configuration")
    _add_algo_flags(p_run)
    p_run.add_argument("--output", default="-", help="summary CSV ('-' = stdout)")
    p_run.add_argument("--per-run", dest="per_run",
                       help="optional per-run CSV path")
    p_run.set_defaults(func=cmd_run)

    p_grid = subs.add_parser("grid", help="(A, b) grid search")
    p_grid.add_argument("--problem", required=True,
                        choices=[ONEMAX, LEADINGONES])
    p_grid.add_argument("--n", required=True, type=int)
    p_grid.add_argument("--A-range", dest="A_range", default="1.0:6.0:0.1",
                        help="MIN:MAX:STEP (default 1.0:6.0:0.1)")
    p_grid.add_argument("--b-range", dest="b_range", default="0.0:1.0:0.02",
                        help="MIN:MAX:STEP (default 0.0:1.0:0.02)")
    p_grid.add_argument("--runs-per-cell", dest="runs_per_cell", type=int,
                        default=101)
    p_grid.add_argument("--seed", required=True, type=int)
    p_grid.add_argument("--p0", help="initial mutation rate (default 1/n)")
    p_grid.add_argument("--budget", type=int)
    p_grid.add_argument("--threads", type=int)
    p_grid.add_argument("--output", required=True, help="grid CSV path")
    p_grid.add_argument("--resume",
                        help="previous partial grid CSV to continue from")
    p_grid.set_defaults(func=cmd_grid)

    p_theory = subs.add_parser("theory", help="exact-formula tables")
    p_theory.add_argument("table", choices=THEORY_TABLES)
    p_theory.add_argument("--n", required=True, type=int)
    p_theory.add_argument("--f", help="fitness value or LO:HI span")
    p_theory.add_argument("--ell", help="step size or LO:HI span")
    p_theory.add_argument("--i", help="target fitness or LO:HI span")
    p_theory.add_argument("--output", default="-")
    p_theory.set_defaults(func=cmd_theory)

    p_trace = subs.add_parser("trace", help="per-iteration traces + aggregate")
    _add_algo_flags(p_trace)
    p_trace.add_argument("--jsonl", required=True,
                         help="per-iteration JSONL path")
    p_trace.add_argument("--aggregate", required=True,
                         help="aggregate CSV path")
    p_trace.add_argument("--force", action="store_true",
                         help="override the trace size guard")
    p_trace.set_defaults(func=cmd_trace)

    p_frac = subs.add_parser("fraction",
                             help="fraction-better-than-baseline curve")
    p_frac.add_argument("--input", required=True, help="grid CSV to analyze")
    p_frac.add_argument("--baseline", default="exact",
                        help="'exact' (RLS on leadingones) or a mean value")
    p_frac.add_argument("--thresholds", default="0:25:1",
                        help="percent thresholds, LO:HI:STEP or comma list")
    p_frac.add_argument("--A-min", dest="A_min", type=float)
    p_frac.add_argument("--A-max", dest="A_max", type=float)
    p_frac.add_argument("--b-min", dest="b_min", type=float)
    p_frac.add_argument("--b-max", dest="b_max", type=float)
    p_frac.add_argument("--output", default="-")
    p_frac.set_defaults(func=cmd_fraction)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResumeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESUME_MISMATCH
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE_GUARD


if __name__ == "__main__":
    sys.exit(main())
