"""Batch experiment harness: repeated runs, the (A, b) grid search,
fraction-better curves, and flip-count trace aggregation.

Seeding is hierarchical: run ``r`` of a plain batch draws from the stream
``(master_seed, r)``, and run ``r`` of grid cell ``(ai, bi)`` draws from
``(master_seed, ai, bi, r)``.  Results are reduced in index order, so output
is identical whether one worker or many executed the tasks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import algorithms, core
from .algorithms import EA_ALPHA, AlgorithmConfig, RunRecord


@dataclass
class BatchSummary:
    """Statistics over the completed runs of one configuration.

    ``mean``/``median``/``stddev``/``min_evals``/``max_evals`` cover only the
    runs that reached the optimum (NaN when none did); censored runs are
    reported via ``budget_exceeded``.  ``fixed_target_mean[i]`` averages the
    first hitting evaluation of fitness level ``i`` over the runs that reached
    it; ``fixed_target_counts[i]`` says how many that was.
    """

    problem: str
    n: int
    runs: int
    mean: float
    median: float
    stddev: float
    min_evals: float
    max_evals: float
    budget_exceeded: int
    fixed_target_mean: np.ndarray = field(repr=False)
    fixed_target_counts: np.ndarray = field(repr=False)
    records: list[RunRecord] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class GridSpec:
    """A full (A, b) grid: ranges are (start, stop, step), both ends included."""

    problem: str
    n: int
    A_range: tuple[float, float, float] = (1.0, 6.0, 0.1)
    b_range: tuple[float, float, float] = (0.0, 1.0, 0.02)
    runs_per_cell: int = 101
    p0: float | None = None
    master_seed: int = 0
    budget: int | None = None

    def __post_init__(self):
        if self.problem not in core.PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind: {self.problem!r}")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be positive")
        if not self.A_values() or not self.b_values():
            raise ValueError("grid ranges must be non-empty")

    def A_values(self) -> list[float]:
        return _inclusive_range(*self.A_range)

    def b_values(self) -> list[float]:
        return _inclusive_range(*self.b_range)


def _inclusive_range(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError("range step must be positive")
    count = int(round((stop - start) / step)) + 1
    values = [round(start + i * step, 10) for i in range(count)]
    return [v for v in values if v <= stop + 1e-9]


@dataclass
class CellStats:
    """One grid cell: the (A, b) pair plus its batch statistics."""

    A: float
    b: float
    runs: int
    mean: float
    median: float
    stddev: float
    min_evals: float
    max_evals: float
    budget_exceeded: int


@dataclass
class GridResult:
    """All cells of a grid search, in A-major order."""

    spec: GridSpec
    cells: list[CellStats]

    def cell(self, A: float, b: float) -> CellStats:
        for c in self.cells:
            if abs(c.A - A) < 1e-9 and abs(c.b - b) < 1e-9:
                return c
        raise KeyError(f"no cell at (A={A}, b={b})")


@dataclass
class TraceAggregate:
    """Mean flip count per starting fitness, pooled over traced runs."""

    problem: str
    n: int
    levels: np.ndarray
    mean_ell: np.ndarray
    iteration_counts: np.ndarray


def _one_run(config: AlgorithmConfig, problem: str, n: int, master_seed: int,
             seed_key: tuple[int, ...], run_index: int,
             collect_trace: bool) -> RunRecord:
    rng = core.derive_rng(master_seed, *seed_key, run_index)
    inst = core.make_problem(problem, n, rng)
    return algorithms.run(config, inst, rng, collect_trace=collect_trace)


def repeat_runs(config: AlgorithmConfig, problem: str, n: int, runs: int,
                master_seed: int, *, seed_key: tuple[int, ...] = (),
                threads: int = 1, collect_trace: bool = False,
                keep_records: bool = True) -> BatchSummary:
    """Execute ``runs`` independent seeded runs and summarize them.

    Each run gets its own instance (hidden data drawn from the run's stream)
    and its own generator, derived from ``(master_seed, *seed_key, run)``.
    The reduction is keyed by run index, so the summary is identical no
    matter how many worker threads executed it.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    indices = range(runs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(
                lambda r: _one_run(config, problem, n, master_seed, seed_key,
                                   r, collect_trace),
                indices,
            ))
    else:
        records = [_one_run(config, problem, n, master_seed, seed_key, r,
                            collect_trace) for r in indices]
    return _summarize(problem, n, records, keep_records)


def _summarize(problem: str, n: int, records: list[RunRecord],
               keep_records: bool) -> BatchSummary:
    done = np.array([r.evaluations_to_optimum for r in records
                     if r.evaluations_to_optimum is not None], dtype=np.float64)
    exceeded = len(records) - len(done)
    if len(done) == 0:
        mean = median = stddev = lo = hi = float("nan")
    else:
        mean = float(done.mean())
        median = float(np.median(done))
        stddev = float(done.std(ddof=1)) if len(done) > 1 else float("nan")
        lo = float(done.min())
        hi = float(done.max())
    ft = np.stack([r.fixed_target for r in records])
    reached = ft >= 0
    counts = reached.sum(axis=0)
    sums = np.where(reached, ft, 0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        ft_mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return BatchSummary(
        problem=problem, n=n, runs=len(records),
        mean=mean, median=median, stddev=stddev,
        min_evals=lo, max_evals=hi, budget_exceeded=int(exceeded),
        fixed_target_mean=ft_mean, fixed_target_counts=counts,
        records=records if keep_records else None,
    )


def grid_search(spec: GridSpec, *, threads: int = 1, progress=None,
                precomputed: dict[tuple[float, float], CellStats] | None = None,
                on_cell=None) -> GridResult:
    """Run one batch per (A, b) cell; deterministic given the master seed.

    ``precomputed`` maps (A, b) pairs to already-known cell statistics (for
    resuming a partial grid); those cells are not re-run.  ``on_cell``, if
    given, receives each ``CellStats`` strictly in A-major grid order as soon
    as it is available, which lets callers stream results to disk at cell
    granularity.  ``progress(done, total)`` reports completion counts.
    """
    A_values = spec.A_values()
    b_values = spec.b_values()
    cell_keys = [(ai, bi) for ai in range(len(A_values))
                 for bi in range(len(b_values))]
    total = len(cell_keys)
    known: dict[tuple[int, int], CellStats] = {}
    pending = []
    for ai, bi in cell_keys:
        pre = None if precomputed is None else precomputed.get(
            (A_values[ai], b_values[bi]))
        if pre is not None:
            known[(ai, bi)] = pre
        else:
            pending.append((ai, bi))

    def run_cell(key: tuple[int, int]) -> CellStats:
        ai, bi = key
        config = AlgorithmConfig(variant=EA_ALPHA, p0=spec.p0,
                                 A=A_values[ai], b=b_values[bi],
                                 budget=spec.budget)
        summary = repeat_runs(config, spec.problem, spec.n, spec.runs_per_cell,
                              spec.master_seed, seed_key=(ai, bi),
                              keep_records=False)
        return CellStats(
            A=A_values[ai], b=b_values[bi], runs=summary.runs,
            mean=summary.mean, median=summary.median, stddev=summary.stddev,
            min_evals=summary.min_evals, max_evals=summary.max_evals,
            budget_exceeded=summary.budget_exceeded,
        )

    def collect(computed) -> list[CellStats]:
        cells = []
        done = 0
        for key in cell_keys:
            stats = known.get(key)
            if stats is None:
                stats = next(computed)
            cells.append(stats)
            done += 1
            if on_cell is not None:
                on_cell(stats)
            if progress is not None:
                progress(done, total)
        return cells

    if threads > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = collect(pool.map(run_cell, pending))
    else:
        cells = collect(map(run_cell, pending))
    return GridResult(spec=spec, cells=cells)


def fraction_better(grid: GridResult | list[CellStats], baseline_mean: float,
                    thresholds: list[float], cell_filter=None,
                    ) -> list[tuple[float, float]]:
    """Fraction of cells beating ``baseline_mean`` by at least each threshold.

    A cell counts toward threshold ``t`` (in percent) when its mean is at
    most ``baseline_mean * (1 - t/100)``.  Cells with any censored run never
    count as better (their completed-run mean understates the truth), but
    they stay in the denominator.  ``cell_filter(A, b)`` restricts the cell
    set, e.g. to the open parameter box a published count refers to.
    """
    cells = grid.cells if isinstance(grid, GridResult) else list(grid)
    if cell_filter is not None:
        cells = [c for c in cells if cell_filter(c.A, c.b)]
    if not cells:
        raise ValueError("cell filter selected no cells")
    curve = []
    for t in thresholds:
        cutoff = baseline_mean * (1.0 - t / 100.0)
        hits = sum(1 for c in cells
                   if c.budget_exceeded == 0 and c.mean <= cutoff)
        curve.append((float(t), hits / len(cells)))
    return curve


def aggregate_traces(records: list[RunRecord]) -> TraceAggregate:
    """Pool traced runs into a mean flip count per starting fitness level.

    All records must come from the same problem kind and dimension and carry
    traces; fitness levels in which no iteration ever started are omitted.
    """
    if not records:
        raise ValueError("no records given")
    problem, n = records[0].problem, records[0].n
    sums = np.zeros(n, dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    for rec in records:
        if (rec.problem, rec.n) != (problem, n):
            raise ValueError("records mix different problems or dimensions")
        if rec.trace is None:
            raise ValueError("record has no trace")
        np.add.at(sums, rec.trace.parent_fitness, rec.trace.ell)
        np.add.at(counts, rec.trace.parent_fitness, 1)
    levels = np.flatnonzero(counts)
    return TraceAggregate(
        problem=problem, n=n, levels=levels,
        mean_ell=sums[levels] / counts[levels],
        iteration_counts=counts[levels],
    )
