"""Bit strings, benchmark problems, and seeded sampling primitives.

Search points are fixed-length numpy ``uint8`` arrays with entries in {0, 1}.
Problems hide their instance data (target string, position order) behind
``evaluate``; optimization code must not look inside.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ONEMAX = "onemax"
LEADINGONES = "leadingones"
PROBLEM_KINDS = (ONEMAX, LEADINGONES)

_KIND_CODES = {ONEMAX: 0, LEADINGONES: 1}
_EMPTY_ORDER = np.empty(0, dtype=np.int64)


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for the stream addressed by ``key``.

    Streams are derived with ``SeedSequence(master_seed, spawn_key=key)``, so
    e.g. ``derive_rng(seed, cell, run)`` is reproducible and independent of
    any other key path, regardless of execution order.
    """
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(k) for k in key)
    )
    return np.random.Generator(np.random.PCG64(ss))


def random_bitstring(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a uniform bit string of length ``n``."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def hamming_distance(x: np.ndarray, y: np.ndarray) -> int:
    if x.shape != y.shape:
        raise ValueError("bit strings have different lengths")
    return int(np.count_nonzero(x != y))


@njit(cache=True, nogil=True)
def _fitness(kind_code, target, order, x):  # pragma: no cover - jitted
    n = x.shape[0]
    if kind_code == 0:
        agree = 0
        for i in range(n):
            if x[i] == target[i]:
                agree += 1
        return agree
    for j in range(n):
        pos = order[j]
        if x[pos] != target[pos]:
            return j
    return n


@njit(cache=True, nogil=True)
def _flip_subset(x, out, ell, scratch, rng):  # pragma: no cover - jitted
    # Copies x into out and flips a uniformly chosen ell-subset of positions.
    # For ell > n/2 it flips everything and un-flips a uniform (n-ell)-subset,
    # so the per-call work stays O(min(ell, n-ell)).  ``scratch`` must be a
    # permutation of 0..n-1; a partial Fisher-Yates pass leaves it one, so the
    # selected subsets stay uniform across repeated calls.
    n = x.shape[0]
    for i in range(n):
        out[i] = x[i]
    if ell <= n // 2:
        m = ell
        invert = False
    else:
        m = n - ell
        invert = True
    for j in range(m):
        r = j + rng.integers(0, n - j)
        tmp = scratch[j]
        scratch[j] = scratch[r]
        scratch[r] = tmp
    if invert:
        for i in range(n):
            out[i] ^= 1
    for j in range(m):
        out[scratch[j]] ^= 1


def mutate(x: np.ndarray, ell: int, rng: np.random.Generator) -> np.ndarray:
    """Flip exactly ``ell`` distinct, uniformly chosen positions of ``x``.

    Returns a new array; ``x`` is left untouched.  The flipped set is uniform
    over all ``C(n, ell)`` subsets, so the Hamming distance between input and
    output is exactly ``ell``.
    """
    n = len(x)
    if not 1 <= ell <= n:
        raise ValueError(f"step size must be in [1, {n}], got {ell}")
    out = np.empty(n, dtype=np.uint8)
    scratch = np.arange(n)
    _flip_subset(np.asarray(x, dtype=np.uint8), out, ell, scratch, rng)
    return out


@njit(cache=True, nogil=True)
def _sample_step(rng, n, p):  # pragma: no cover - jitted
    # Inverse-transform sample from the zero-truncated binomial: draw a
    # uniform in the cdf range above P(0) and walk the pmf recurrence
    # pmf(k+1) = pmf(k) * (n-k)/(k+1) * p/(1-p) until the cdf passes it.
    q0 = np.exp(n * np.log1p(-p))
    u = q0 + rng.random() * (1.0 - q0)
    cdf = q0
    pmf = q0
    k = 0
    while cdf <= u and k < n:
        pmf = pmf * ((n - k) / (k + 1.0)) * (p / (1.0 - p))
        k += 1
        cdf += pmf
    return k


class StepSizeDistribution:
    """The zero-truncated binomial step-size law Bin_{>0}(n, p).

    ``sample`` returns integers k in [1, n] with probability
    ``C(n,k) p^k (1-p)^(n-k) / (1 - (1-p)^n)``.  The truncated pmf is
    precomputed once per instance with the multiplicative recurrence (the
    normalizer is evaluated in log space, so tiny rates do not underflow),
    and sampling is a plain inverse transform on the cached cdf.
    """

    def __init__(self, n: int, p: float):
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        p = float(p)
        if not 0.0 < p <= 0.5:
            raise ValueError(f"mutation probability must be in (0, 1/2], got {p}")
        if n > 1 and p < 1.0 / (n * n):
            raise ValueError(
                f"mutation probability below the 1/n^2 floor: {p} < {1.0 / (n * n)}"
            )
        self.n = n
        self.p = p
        log_q0 = n * np.log1p(-p)
        norm = -np.expm1(log_q0)  # 1 - (1-p)^n, accurate for small n*p
        pmf = np.empty(n, dtype=np.float64)
        cur = np.exp(log_q0)
        for k in range(n):
            cur = cur * ((n - k) / (k + 1.0)) * (p / (1.0 - p))
            pmf[k] = cur
        self.probabilities = pmf / norm
        self.probabilities.flags.writeable = False
        self._cdf = np.cumsum(self.probabilities)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw one step size (or ``size`` of them) in [1, n]."""
        u = rng.random(size)
        k = np.searchsorted(self._cdf, u, side="right") + 1
        if size is None:
            return int(min(k, self.n))
        return np.minimum(k, self.n)

    def __repr__(self) -> str:
        return f"StepSizeDistribution(n={self.n}, p={self.p})"


class Problem:
    """A pseudo-Boolean benchmark with hidden instance data.

    Subclasses store the secret target string (and, for LeadingOnes, the
    secret position order).  Everything outside this module interacts with an
    instance only through ``evaluate``, which also counts calls: the counter
    goes up by exactly one per call and is never reset implicitly.
    """

    kind: str = ""

    def __init__(self, n: int, target: np.ndarray):
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        target = np.asarray(target, dtype=np.uint8)
        if target.shape != (n,):
            raise ValueError("target string has the wrong length")
        if not np.all((target == 0) | (target == 1)):
            raise ValueError("target string entries must be 0 or 1")
        self.n = n
        self._target = target
        self._order = _EMPTY_ORDER
        self._evals = 0

    @property
    def eval_count(self) -> int:
        return self._evals

    @property
    def optimum(self) -> int:
        return self.n

    def evaluate(self, x: np.ndarray) -> int:
        """Fitness of ``x`` in [0, n]; equals n iff ``x`` is the optimum."""
        x = np.asarray(x, dtype=np.uint8)
        if x.shape != (self.n,):
            raise ValueError(
                f"search point has length {x.shape}, expected ({self.n},)"
            )
        self._evals += 1
        return int(_fitness(_KIND_CODES[self.kind], self._target, self._order, x))

    def _credit(self, evaluations: int) -> None:
        # Used by batch runners that evaluate inside a compiled loop.
        self._evals += int(evaluations)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, evals={self._evals})"


class OneMax(Problem):
    """Count of positions agreeing with a hidden target string."""

    kind = ONEMAX

    def __init__(self, n: int, target: np.ndarray | None = None,
                 rng: np.random.Generator | None = None):
        if target is None:
            target = _default_target(n, rng)
        super().__init__(n, target)


class LeadingOnes(Problem):
    """Length of the longest prefix agreeing with a hidden target, where the
    prefix is read in a hidden permutation of the positions."""

    kind = LEADINGONES

    def __init__(self, n: int, target: np.ndarray | None = None,
                 order: np.ndarray | None = None,
                 rng: np.random.Generator | None = None):
        if target is None:
            target = _default_target(n, rng)
        super().__init__(n, target)
        if order is None:
            order = rng.permutation(n) if rng is not None else np.arange(n)
        order = np.asarray(order, dtype=np.int64)
        if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("position order must be a permutation of 0..n-1")
        self._order = order


def _default_target(n: int, rng: np.random.Generator | None) -> np.ndarray:
    if rng is None:
        return np.ones(n, dtype=np.uint8)
    return random_bitstring(n, rng)


def make_problem(kind: str, n: int,
                 rng: np.random.Generator | None = None) -> Problem:
    """Create a fresh instance; hidden data is drawn from ``rng`` if given."""
    if kind == ONEMAX:
        return OneMax(n, rng=rng)
    if kind == LEADINGONES:
        return LeadingOnes(n, rng=rng)
    raise ValueError(f"unknown problem kind: {kind!r}")


def _kernel_view(problem: Problem):
    # Opaque payload for compiled run loops; callers forward it to _fitness
    # without interpreting the contents.
    return _KIND_CODES[problem.kind], problem._target, problem._order
