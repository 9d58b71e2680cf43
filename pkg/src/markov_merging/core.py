"""State spaces, measures, kernels and schedules.

Kernels and measures are thin immutable wrappers around read-only float64
arrays.  Every public function in the package also accepts plain array-likes
wherever a :class:`Kernel` or :class:`Measure` is expected; the ``check_*``
helpers do the coercion and validation, in the spirit of sklearn's
``check_array``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    IndexOrder,
    MeasureSumViolation,
    NegativeEntry,
    NotReversible,
    Reducible,
    RowSumViolation,
    ValidationError,
    ZeroReference,
)

ROW_SUM_TOL = 1e-12
BALANCE_TOL = 1e-10

SCHEDULE_RULES = ("explicit", "fixed-cycle", "seeded-random", "explicit-index-sequence")


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    size: int
    labels: tuple | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValidationError(f"state space needs at least one state, got {self.size}")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.size or len(set(labels)) != len(labels):
                raise ValidationError("labels must be unique and one per state")
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability vector on a finite state space."""

    weights: np.ndarray
    space: StateSpace = None

    def __post_init__(self):
        w = _frozen(check_measure(np.asarray(self.weights, dtype=np.float64)))
        object.__setattr__(self, "weights", w)
        if self.space is None:
            object.__setattr__(self, "space", StateSpace(w.size))
        elif self.space.size != w.size:
            raise ValidationError("weights do not match the state space size")

    @classmethod
    def uniform(cls, size):
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size, x):
        w = np.zeros(size)
        w[x] = 1.0
        return cls(w)

    @property
    def positive(self):
        return bool(np.all(self.weights > 0))

    @property
    def size(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __len__(self):
        return self.weights.size

    def __repr__(self):
        return f"Measure(size={self.size}, positive={self.positive})"


@dataclass(frozen=True, eq=False)
class Kernel:
    """Row-stochastic matrix.  Construct through :func:`validate_kernel`."""

    matrix: np.ndarray
    space: StateSpace = None

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        if self.space is None:
            object.__setattr__(self, "space", StateSpace(m.shape[0]))

    @classmethod
    def identity(cls, size):
        return cls(np.eye(size))

    @property
    def size(self):
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, Kernel):
            return Kernel(self.matrix @ other.matrix, self.space)
        return self.matrix @ np.asarray(other)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.matrix

    def __repr__(self):
        return f"Kernel(size={self.size})"


# --- validation helpers -------------------------------------------------------

def check_kernel(K, tol=ROW_SUM_TOL):
    """Return ``K`` as a float array after checking it is row stochastic.

    Raises
    ------
    NegativeEntry
        For the first negative entry found (row-major order).
    RowSumViolation
        For the row with the largest deviation from 1.
    """
    if isinstance(K, Kernel):
        return K.matrix
    a = np.asarray(K, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValidationError(f"kernel must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("kernel has non-finite entries")
    neg = np.argwhere(a < 0)
    if neg.size:
        i, j = neg[0]
        raise NegativeEntry(int(i), int(j), float(a[i, j]))
    dev = a.sum(axis=1) - 1.0
    worst = int(np.argmax(np.abs(dev)))
    if abs(dev[worst]) > tol:
        raise RowSumViolation(worst, float(dev[worst]))
    return a


def check_measure(mu, size=None, positive=False, tol=ROW_SUM_TOL):
    """Return ``mu`` as a float vector after checking it is a probability vector."""
    if isinstance(mu, Measure):
        w = mu.weights
    else:
        w = np.asarray(mu, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("measure must be a non-empty vector")
        if np.any(w < 0):
            raise ValidationError(f"measure has negative weight at {int(np.argmin(w))}")
        dev = w.sum() - 1.0
        if abs(dev) > tol:
            raise MeasureSumViolation(float(dev))
    if size is not None and w.size != size:
        raise ValidationError(f"measure has {w.size} states, expected {size}")
    if positive and not np.all(w > 0):
        raise ZeroReference(f"reference measure vanishes at state {int(np.argmin(w))}")
    return w


def validate_kernel(rows, space=None, tol=ROW_SUM_TOL):
    """Validate a raw matrix and wrap it as a :class:`Kernel`."""
    a = check_kernel(np.asarray(rows, dtype=np.float64) if not isinstance(rows, Kernel) else rows, tol)
    if space is not None and space.size != a.shape[0]:
        raise ValidationError("matrix does not match the state space")
    return Kernel(a, space)


# --- schedules ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Schedule:
    """A deterministic sequence ``K_1, K_2, ...`` drawn from a finite kernel set.

    ``indices[i - 1]`` is the position in ``kernels`` of the kernel used at
    step ``i``.  Use the classmethod constructors rather than building one by
    hand.  Seeded schedules use numpy's PCG64 generator, so a given
    ``(kernels, seed, horizon)`` always replays the same sequence, and a longer
    horizon extends a shorter one.
    """

    kernels: tuple
    indices: np.ndarray
    rule: str = "explicit"
    seed: int | None = None
    names: tuple | None = None
    _matrices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ks = tuple(k if isinstance(k, Kernel) else validate_kernel(k) for k in self.kernels)
        if not ks:
            raise ValidationError("schedule needs at least one kernel")
        size = ks[0].size
        if any(k.size != size for k in ks):
            raise ValidationError("all kernels in a schedule must share one state space")
        idx = np.array(self.indices, dtype=np.int64, copy=True)
        if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= len(ks))):
            raise ValidationError("schedule indices out of range")
        idx.setflags(write=False)
        if self.rule not in SCHEDULE_RULES:
            raise ValidationError(f"unknown selection rule {self.rule!r}")
        object.__setattr__(self, "kernels", ks)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_matrices", np.stack([k.matrix for k in ks]))
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def explicit(cls, kernels):
        kernels = list(kernels)
        return cls(kernels, np.arange(len(kernels)), rule="explicit")

    @classmethod
    def constant(cls, K, horizon):
        return cls([K], np.zeros(horizon, dtype=np.int64), rule="fixed-cycle")

    @classmethod
    def cycle(cls, kernels, horizon, names=None):
        kernels = list(kernels)
        return cls(kernels, np.arange(horizon) % len(kernels), rule="fixed-cycle", names=names)

    @classmethod
    def random(cls, kernels, horizon, seed, names=None):
        kernels = list(kernels)
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(kernels), size=horizon)
        return cls(kernels, idx, rule="seeded-random", seed=seed, names=names)

    @classmethod
    def from_indices(cls, kernels, indices, names=None):
        return cls(list(kernels), indices, rule="explicit-index-sequence", names=names)

    @property
    def horizon(self):
        return int(self.indices.size)

    @property
    def size(self):
        return self.kernels[0].size

    def matrix(self, i):
        """Matrix of ``K_i`` (steps are numbered from 1)."""
        if not 1 <= i <= self.horizon:
            raise IndexError(f"step {i} outside 1..{self.horizon}")
        return self._matrices[self.indices[i - 1]]

    def kernel(self, i):
        return self.kernels[self.indices[i - 1]] if 1 <= i <= self.horizon else self.matrix(i)

    def __len__(self):
        return self.horizon

    def __iter__(self) -> Iterator[np.ndarray]:
        for j in self.indices:
            yield self._matrices[j]

    def truncate(self, horizon):
        return Schedule(self.kernels, self.indices[:horizon], self.rule, self.seed, self.names)


def check_schedule(schedule) -> Schedule:
    if isinstance(schedule, Schedule):
        return schedule
    return Schedule.explicit(schedule)


# --- operations -----------------------------------------------------------------

def compose(schedule, n, m):
    """``K_{n,m} = K_{n+1} ... K_m``; the identity when ``n == m``."""
    schedule = check_schedule(schedule)
    if n > m:
        raise IndexOrder(n, m)
    if n < 0 or m > schedule.horizon:
        raise ValidationError(f"steps must lie in 0..{schedule.horizon}")
    out = np.eye(schedule.size)
    for i in range(n + 1, m + 1):
        out = out @ schedule.matrix(i)
    return Kernel(out)


def iter_products(schedule, horizon=None):
    """Yield ``(n, K_{0,n})`` for ``n = 0..horizon`` as plain arrays."""
    schedule = check_schedule(schedule)
    horizon = schedule.horizon if horizon is None else horizon
    prod = np.eye(schedule.size)
    yield 0, prod
    for n in range(1, horizon + 1):
        prod = prod @ schedule.matrix(n)
        yield n, prod


def evolve(mu0, schedule, n=None):
    """Distributions ``mu_0, ..., mu_n`` as the rows of an ``(n + 1, size)`` array."""
    schedule = check_schedule(schedule)
    n = schedule.horizon if n is None else n
    mu = check_measure(mu0, schedule.size)
    out = np.empty((n + 1, schedule.size))
    out[0] = mu
    for k in range(1, n + 1):
        out[k] = out[k - 1] @ schedule.matrix(k)
    return out


def is_irreducible(K):
    a = np.asarray(K, dtype=np.float64)
    if a.shape[0] == 1:
        return True
    ncomp, _ = connected_components(a > 0, directed=True, connection="strong")
    return ncomp == 1


def invariant_measure(K):
    """Unique invariant probability of an irreducible kernel.

    Solves ``pi (K - I) = 0`` with one equation replaced by the normalisation.
    """
    a = check_kernel(K)
    n = a.shape[0]
    if not is_irreducible(a):
        raise Reducible("kernel graph is not strongly connected")
    A = a.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return Measure(pi)


def check_reversible(K, pi, tol=BALANCE_TOL):
    """Return ``(is_reversible, max |pi(x)K(x,y) - pi(y)K(y,x)|)``."""
    a = np.asarray(K, dtype=np.float64)
    w = check_measure(pi, a.shape[0], positive=True)
    flux = w[:, None] * a
    viol = float(np.max(np.abs(flux - flux.T)))
    return viol <= tol, viol


def require_reversible(K, pi, tol=BALANCE_TOL):
    ok, viol = check_reversible(K, pi, tol)
    if not ok:
        raise NotReversible(viol)


def lazy(K):
    """``(I + K) / 2``."""
    a = check_kernel(K)
    return Kernel(0.5 * (np.eye(a.shape[0]) + a))


def stack_kernels(kernels: Sequence) -> list:
    return [k if isinstance(k, Kernel) else validate_kernel(k) for k in kernels]
