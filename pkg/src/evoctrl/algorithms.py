"""The five (1+1)-type algorithm variants behind a single run-to-optimum call.

Variants differ only in how they pick the per-iteration flip count:

* ``rls``          -- always one bit
* ``rls-opt-om``   -- the fitness-indexed drift maximizer (OneMax only)
* ``rls-opt-lo``   -- the fitness-indexed improvement maximizer (LeadingOnes only)
* ``ea-gt0``       -- zero-truncated binomial with a fixed rate
* ``ea-alpha``     -- zero-truncated binomial with a success-multiplied rate

All variants share elitist acceptance (the offspring replaces the parent iff
its fitness is at least as good) and count the initial uniform sample as
evaluation number one.  The loop itself is compiled; a run of any size costs
Python overhead only once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import core, theory
from .core import LEADINGONES, ONEMAX

RLS = "rls"
RLS_OPT_OM = "rls-opt-om"
RLS_OPT_LO = "rls-opt-lo"
EA_GT0 = "ea-gt0"
EA_ALPHA = "ea-alpha"
VARIANTS = (RLS, RLS_OPT_OM, RLS_OPT_LO, EA_GT0, EA_ALPHA)

_MODE_ONE = 0
_MODE_TABLE = 1
_MODE_SAMPLED = 2

_NO_TABLE = np.empty(0, dtype=np.int64)


class ConfigurationError(ValueError):
    """An algorithm configuration that cannot be run as requested."""


@dataclass(frozen=True)
class AlgorithmConfig:
    """Which variant to run and with which parameters.

    ``p0`` of ``None`` means the conventional initial rate 1/n, resolved once
    the problem dimension is known.  ``budget`` of ``None`` resolves to
    ``100 * n**2`` evaluations, generous enough that only genuinely divergent
    rate-control settings ever hit it.
    """

    variant: str
    p0: float | None = None
    A: float = 1.0
    b: float = 1.0
    budget: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant: {self.variant!r}")
        if self.A < 1.0:
            raise ConfigurationError(f"increase factor must be >= 1, got {self.A}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigurationError(f"decrease factor must be in [0, 1], got {self.b}")
        if self.budget is not None and self.budget < 1:
            raise ConfigurationError(f"budget must be positive, got {self.budget}")

    def resolved_p0(self, n: int) -> float:
        p0 = 1.0 / n if self.p0 is None else float(self.p0)
        floor, cap = rate_bounds(n)
        if not floor <= p0 <= cap:
            raise ConfigurationError(
                f"initial rate {p0} outside [{floor}, {cap}] for n={n}"
            )
        return p0

    def resolved_budget(self, n: int) -> int:
        return 100 * n * n if self.budget is None else int(self.budget)


@dataclass
class Trace:
    """Per-iteration log: parent fitness, flip count, rate in effect, outcome."""

    parent_fitness: np.ndarray
    ell: np.ndarray
    rate: np.ndarray
    accepted: np.ndarray

    def __len__(self) -> int:
        return len(self.ell)


@dataclass
class RunRecord:
    """Outcome of one run.

    ``evaluations_to_optimum`` is ``None`` when the budget ran out first.
    ``fixed_target[i]`` is the first evaluation index at which the best-so-far
    fitness reached at least ``i`` (-1 where never reached).
    """

    problem: str
    n: int
    evaluations_to_optimum: int | None
    total_evaluations: int
    fixed_target: np.ndarray
    trace: Trace | None = field(default=None, repr=False)

    @property
    def reached_optimum(self) -> bool:
        return self.evaluations_to_optimum is not None


def rate_bounds(n: int) -> tuple[float, float]:
    """The mutation-rate confinement interval [1/n^2, 1/2]."""
    # For n = 1 the nominal floor exceeds the cap; the rate is irrelevant
    # there (the only step size is 1), so the floor is clamped to the cap.
    return min(1.0 / (n * n), 0.5), 0.5


def update_rate(p: float, accepted: bool, A: float, b: float, n: int) -> float:
    """Multiplicative success-based rate update, capped to [1/n^2, 1/2]."""
    floor, cap = rate_bounds(n)
    if accepted:
        return min(A * p, cap)
    return max(b * p, floor)


@njit(cache=True, nogil=True)
def _run_loop(kind, target, order, mode, p0, A, b, p_floor, p_cap, budget,
              step_table, rng, want_trace):  # pragma: no cover - jitted
    n = target.shape[0]
    x = np.empty(n, dtype=np.uint8)
    for i in range(n):
        x[i] = rng.integers(0, 2)
    fit = core._fitness(kind, target, order, x)
    evals = 1
    fixed_target = np.full(n + 1, -1, dtype=np.int64)
    for lvl in range(fit + 1):
        fixed_target[lvl] = 1

    cap0 = 1024 if want_trace else 0
    tr_fit = np.empty(cap0, dtype=np.int64)
    tr_ell = np.empty(cap0, dtype=np.int64)
    tr_rate = np.empty(cap0, dtype=np.float64)
    tr_acc = np.empty(cap0, dtype=np.uint8)
    t = 0

    p = p0
    y = np.empty(n, dtype=np.uint8)
    scratch = np.arange(n)
    while fit < n and evals < budget:
        if mode == _MODE_ONE:
            ell = 1
        elif mode == _MODE_TABLE:
            ell = int(step_table[fit])
        else:
            ell = core._sample_step(rng, n, p)
        core._flip_subset(x, y, ell, scratch, rng)
        fy = core._fitness(kind, target, order, y)
        evals += 1
        accepted = fy >= fit
        if want_trace:
            if t == tr_fit.shape[0]:
                grown = np.empty(2 * t, dtype=np.int64)
                grown[:t] = tr_fit
                tr_fit = grown
                grown = np.empty(2 * t, dtype=np.int64)
                grown[:t] = tr_ell
                tr_ell = grown
                grown_f = np.empty(2 * t, dtype=np.float64)
                grown_f[:t] = tr_rate
                tr_rate = grown_f
                grown_b = np.empty(2 * t, dtype=np.uint8)
                grown_b[:t] = tr_acc
                tr_acc = grown_b
            tr_fit[t] = fit
            tr_ell[t] = ell
            tr_rate[t] = p
            tr_acc[t] = 1 if accepted else 0
            t += 1
        if accepted:
            tmp = x
            x = y
            y = tmp
            if fy > fit:
                for lvl in range(fit + 1, fy + 1):
                    fixed_target[lvl] = evals
                fit = fy
        if mode == _MODE_SAMPLED:
            if accepted:
                p = min(A * p, p_cap)
            else:
                p = max(b * p, p_floor)
    return (evals, fit, fixed_target,
            tr_fit[:t].copy(), tr_ell[:t].copy(),
            tr_rate[:t].copy(), tr_acc[:t].copy())


def _resolve(config: AlgorithmConfig, inst: core.Problem):
    if config.variant == RLS_OPT_OM and inst.kind != ONEMAX:
        raise ConfigurationError("the drift-maximizing variant needs a OneMax instance")
    if config.variant == RLS_OPT_LO and inst.kind != LEADINGONES:
        raise ConfigurationError(
            "the improvement-maximizing variant needs a LeadingOnes instance"
        )
    if config.variant == RLS:
        return _MODE_ONE, float("nan"), 1.0, 1.0, _NO_TABLE
    if config.variant in (RLS_OPT_OM, RLS_OPT_LO):
        return (_MODE_TABLE, float("nan"), 1.0, 1.0,
                theory.optimal_step_table(inst.kind, inst.n))
    p0 = config.resolved_p0(inst.n)
    if config.variant == EA_GT0:
        return _MODE_SAMPLED, p0, 1.0, 1.0, _NO_TABLE
    return _MODE_SAMPLED, p0, float(config.A), float(config.b), _NO_TABLE


def run(config: AlgorithmConfig, inst: core.Problem, rng: np.random.Generator,
        collect_trace: bool = False) -> RunRecord:
    """Run ``config`` on a fresh instance until its optimum or the budget.

    The record's fixed-target profile is always filled in at fitness
    granularity one; the per-iteration trace is only kept when asked for.
    Exhausting the budget is an outcome, not an error.
    """
    if inst.eval_count != 0:
        raise ConfigurationError("instance has already been evaluated; use a fresh one")
    mode, p0, A, b, table = _resolve(config, inst)
    floor, cap = rate_bounds(inst.n)
    kind, target, order = core._kernel_view(inst)
    evals, fit, fixed_target, tr_fit, tr_ell, tr_rate, tr_acc = _run_loop(
        kind, target, order, mode, p0, A, b, floor, cap,
        config.resolved_budget(inst.n), table, rng, collect_trace,
    )
    inst._credit(evals)
    trace = None
    if collect_trace:
        trace = Trace(tr_fit, tr_ell, tr_rate, tr_acc.astype(bool))
    return RunRecord(
        problem=inst.kind,
        n=inst.n,
        evaluations_to_optimum=int(evals) if fit == inst.n else None,
        total_evaluations=int(evals),
        fixed_target=fixed_target,
        trace=trace,
    )
