"""Constructors for the example families.

Each constructor returns a :class:`GalleryInstance` carrying the kernel(s),
reference measures and the theoretical constants known for the family.
Every constant records where it comes from: ``"paper"`` for values taken
from the published analysis, ``"derived"`` for values computed here from a
closed form, ``"trivial"`` for values forced by the construction.

State layouts
-------------
circle
    state ``k`` is the residue ``k mod p``; position ``-x`` is state ``p - x``.
birth-and-death on ``{-N..N}``
    state ``k`` is position ``k - N``.
hypercube ``{0,1}^{2N}``
    state ``k`` is the bitmask; its Hamming level is ``popcount(k)``.
symmetric group ``S_n``
    permutations of ``0..n-1`` as tuples, ranked lexicographically.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np

from .core import Kernel, Measure, check_kernel, invariant_measure, lazy as lazy_kernel
from .exceptions import DeltaTooLarge, TooLarge, ValidationError

PROVENANCE = ("paper", "derived", "trivial")


@dataclass(frozen=True)
class Constant:
    value: float
    provenance: str
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValidationError(f"unknown provenance {self.provenance!r}")

    def to_dict(self):
        return {"value": float(self.value), "provenance": self.provenance, "note": self.note}


@dataclass
class GalleryInstance:
    family: str
    params: dict
    kernels: list
    measures: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    labels: list | None = None

    @property
    def kernel(self) -> Kernel:
        return self.kernels[0]

    @property
    def size(self):
        return self.kernel.size

    def manifest(self):
        return {
            "family": self.family,
            "params": self.params,
            "size": self.size,
            "kernels": len(self.kernels),
            "measures": sorted(self.measures),
            "constants": {k: c.to_dict() for k, c in self.constants.items()},
            "flags": self.flags,
        }

    def to_json(self):
        return json.dumps(self.manifest(), indent=2)


def _finish(a):
    """Validate and wrap; clean up rounding in the diagonal."""
    a = np.asarray(a, dtype=np.float64)
    return Kernel(check_kernel(a))


# --- circle ---------------------------------------------------------------------------

def circle_kernel(p, delta, lazy=False, site=0):
    """Simple random walk on ``Z/pZ`` with the asymmetric perturbation at row ``site``.

    Row ``site`` sends ``1/2 + delta`` to ``site + 1`` and ``1/2 - delta`` to
    ``site - 1``.  ``site=0`` is the family itself; other sites exist for
    negative controls.
    """
    if p < 3:
        raise ValidationError("circle needs at least 3 states")
    if abs(delta) >= 0.5:
        raise DeltaTooLarge(f"|delta| must be < 1/2, got {delta}")
    a = np.zeros((p, p))
    idx = np.arange(p)
    a[idx, (idx + 1) % p] = 0.5
    a[idx, (idx - 1) % p] = 0.5
    a[site, (site + 1) % p] += delta
    a[site, (site - 1) % p] -= delta
    K = _finish(a)
    return lazy_kernel(K) if lazy else K


def circle(p, delta, lazy=False):
    K = circle_kernel(p, delta, lazy)
    eps = abs(delta)
    u = Measure.uniform(p)
    consts = {
        "stability": Constant((1 + 2 * eps) / (1 - 2 * eps), "paper",
                              "closure of S_N(eps) gives this stability constant w.r.t. uniform"),
        "envelope_low": Constant((1 - 2 * eps) / p, "paper", "pointwise lower envelope of S_N(eps)"),
        "envelope_high": Constant((1 + 2 * eps) / p, "paper", "pointwise upper envelope of S_N(eps)"),
    }
    if lazy:
        consts["P_diag"] = Constant(3 / 8, "paper", "K*K for the unperturbed lazy walk, offset 0")
        consts["P_offset1"] = Constant(1 / 4, "paper", "offset +-1")
        consts["P_offset2"] = Constant(1 / 16, "paper", "offset +-2")
    return GalleryInstance(
        "circle", {"p": p, "delta": delta, "lazy": lazy}, [K], {"uniform": u}, consts,
        {"periodic": bool(p % 2 == 0 and not lazy)},
    )


def circle_family(p, eps, grid=11, lazy=False):
    """Kernels ``Q_delta`` for ``grid`` equally spaced ``delta`` in ``[-eps, eps]``."""
    deltas = np.linspace(-eps, eps, grid) if grid > 1 else np.array([eps])
    return [circle_kernel(p, float(d), lazy) for d in deltas], deltas


def circle_half_size(p):
    """``N`` with ``p = 2N`` or ``p = 2N + 1``."""
    return p // 2


# --- Metropolis birth and death ---------------------------------------------------------

def bd_base(N):
    """Symmetric walk on ``{-N..N}``: 1/3 to each side, holding 1/3 inside and 2/3 at the ends."""
    n = 2 * N + 1
    a = np.zeros((n, n))
    for k in range(n):
        if k > 0:
            a[k, k - 1] = 1 / 3
        if k < n - 1:
            a[k, k + 1] = 1 / 3
        a[k, k] = 1.0 - a[k].sum()
    return a


def metropolis(base, target):
    """Metropolis chain with proposal ``base`` and acceptance ``min(1, pi(y)/pi(x))``."""
    base = np.asarray(base, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    accept = np.minimum(1.0, t[None, :] / t[:, None])
    a = base * accept
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, 1.0 - a.sum(axis=1))
    return a


def zeta(alpha, N):
    """``sum_{i=0}^N (1 + i)^{-alpha}``."""
    return float(np.sum((1.0 + np.arange(N + 1)) ** (-alpha)))


def bd_targets(alpha, N):
    x = np.arange(-N, N + 1)
    hat = (N - np.abs(x) + 1.0) ** alpha
    check = (np.abs(x) + 1.0) ** alpha
    return hat / hat.sum(), check / check.sum()


def metropolis_bd(alpha, N, family="hat"):
    if alpha < 0 or N < 1:
        raise ValidationError("need alpha >= 0 and N >= 1")
    if family not in ("hat", "check"):
        raise ValidationError("family must be 'hat' or 'check'")
    hat, check = bd_targets(alpha, N)
    target = hat if family == "hat" else check
    K = _finish(metropolis(bd_base(N), target))
    q0 = (1 / 3) * (N / (N + 1)) ** alpha if family == "hat" else 1 / 3
    consts = {
        "q0": Constant(q0, "paper", "K(0, -1)"),
        "nash_D": Constant(1 + alpha, "paper", "Nash dimension exponent"),
        "zeta": Constant(zeta(alpha, N), "derived", "sum_{i=0}^N (1+i)^-alpha"),
        "epsilon": Constant(q0 / 2, "paper", "perturbation size used for the stability result"),
        "stability": Constant((q0 + q0 / 2) / (q0 - q0 / 2), "paper",
                              "(q0 + eps)/(q0 - eps) at eps = q0/2"),
    }
    return GalleryInstance("metropolis_bd", {"alpha": alpha, "N": N, "family": family}, [K],
                           {"target": Measure(target)}, consts)


def check_symmetric_bd(Q, tol=1e-12):
    """True when ``Q`` is a birth-and-death kernel on ``{-N..N}`` symmetric about the middle."""
    a = np.asarray(Q, dtype=np.float64)
    n = a.shape[0]
    if n % 2 == 0:
        return False
    band = np.triu(a, 2) + np.tril(a, -2)
    if np.abs(band).max() > tol:
        return False
    flipped = a[::-1, ::-1]
    return bool(np.abs(a - flipped).max() <= tol)


# --- hypercube --------------------------------------------------------------------------

def popcounts(size):
    idx = np.arange(size)
    out = np.zeros(size, dtype=np.int64)
    while np.any(idx):
        out += idx & 1
        idx = idx >> 1
    return out


def hypercube_kernel(two_N, delta, lazy=True):
    """Walk on ``{0,1}^{2N}`` flipping a uniform coordinate, biased by ``delta`` at the middle level.

    Rows at Hamming level ``N`` send ``(1 + delta)/(2N)`` to each neighbour one
    level up and ``(1 - delta)/(2N)`` to each neighbour one level down.
    """
    if two_N % 2 or two_N < 2:
        raise ValidationError("dimension must be a positive even integer")
    if two_N > 12:
        raise TooLarge("dimension above 12 (4096 states) is not supported")
    if abs(delta) >= 1:
        raise DeltaTooLarge("|delta| must be < 1")
    N = two_N // 2
    size = 1 << two_N
    lev = popcounts(size)
    a = np.zeros((size, size))
    x = np.arange(size)
    for k in range(two_N):
        y = x ^ (1 << k)
        w = np.full(size, 1.0 / two_N)
        mid = lev == N
        up = (x >> k) & 1 == 0
        w[mid & up] = (1 + delta) / two_N
        w[mid & ~up] = (1 - delta) / two_N
        a[x, y] = w
    K = _finish(a)
    return lazy_kernel(K) if lazy else K


def hypercube_C(eps):
    """``(1 + eps)^-2 (1 - eps)^4``."""
    return (1 + eps) ** -2 * (1 - eps) ** 4


def hypercube(two_N, delta, lazy=True):
    K = hypercube_kernel(two_N, delta, lazy)
    N = two_N // 2
    eps = abs(delta)
    consts = {
        "C": Constant(hypercube_C(eps), "paper", "comparison constant for singular values and l(P_i)"),
        "sigma1_lazy_srw": Constant(1 - 1 / two_N, "paper", "lazy unperturbed walk, uniform measure"),
        "gap_srw": Constant(1 / N, "paper", "1 - sigma_1 of the non-lazy walk's reversibilization"),
        "ls_lazy_srw": Constant(1 / (4 * N), "paper", "l(Q) of the lazy unperturbed walk"),
        "ls_srw": Constant(1 / (2 * N), "paper", "l(K_0) of the non-lazy unperturbed walk"),
        "sigma1_bound": Constant(1 - hypercube_C(eps) / two_N, "paper", "upper bound on sigma_1(K_i, mu_i)"),
        "ls_bound": Constant(hypercube_C(eps) / (4 * N), "paper", "lower bound on l(P_i)"),
        "stability": Constant((1 + eps) / (1 - eps), "paper", "w.r.t. any measure of S_2N"),
    }
    return GalleryInstance("hypercube", {"two_N": two_N, "delta": delta, "lazy": lazy}, [K],
                           {"uniform": Measure.uniform(1 << two_N)}, consts,
                           {"periodic": not lazy})


def hypercube_family(two_N, eps, grid=5, lazy=True):
    deltas = np.linspace(-eps, eps, grid) if grid > 1 else np.array([eps])
    return [hypercube_kernel(two_N, float(d), lazy) for d in deltas], deltas


def level_lump(K, two_N):
    """Project a level-symmetric hypercube kernel onto Hamming levels (``2N + 1`` states)."""
    a = np.asarray(K, dtype=np.float64)
    lev = popcounts(1 << two_N)
    out = np.zeros((two_N + 1, two_N + 1))
    for i in range(two_N + 1):
        x = int(np.flatnonzero(lev == i)[0])
        out[i] = np.bincount(lev, weights=a[x], minlength=two_N + 1)
    return out


# --- symmetric group --------------------------------------------------------------------

@lru_cache(maxsize=None)
def perm_table(n):
    """Lexicographic list of permutations of ``0..n-1`` and the inverse rank map."""
    if n > 6:
        raise TooLarge("symmetric groups above S_6 are not supported")
    perms = list(permutations(range(n)))
    return perms, {p: k for k, p in enumerate(perms)}


def compose_perm(x, y):
    """``(x o y)(k) = x(y(k))``."""
    return tuple(x[y[k]] for k in range(len(x)))


def inverse_perm(x):
    out = [0] * len(x)
    for k, v in enumerate(x):
        out[v] = k
    return tuple(out)


def transposition(n, i, j):
    t = list(range(n))
    t[i], t[j] = t[j], t[i]
    return tuple(t)


def transpose_i_kernel(n, i, lazy=True):
    """Transpose card ``i`` (1-based) with a uniform card, the identity included.

    ``y = x o (i j)`` with probability ``1/n`` for each ``j``.
    """
    if not 1 <= i <= n:
        raise ValidationError("position i must lie in 1..n")
    perms, rank = perm_table(n)
    m = len(perms)
    a = np.zeros((m, m))
    for k, x in enumerate(perms):
        for j in range(n):
            a[k, rank[compose_perm(x, transposition(n, i - 1, j))]] += 1.0 / n
    K = _finish(a)
    return lazy_kernel(K) if lazy else K


def transpose_i_random(n, i, lazy=True):
    K = transpose_i_kernel(n, i, lazy)
    consts = {
        "mls_upper": Constant(1 / (n - 1), "paper", "upper bound on l'(Q_i)"),
        "mls_lower": Constant(1 / (4 * (n - 1)), "paper", "lower bound on l'(Q_i)"),
        "nu": Constant(n - 1, "derived", "max 1/K(x,y) - 1 of the non-lazy kernel"),
    }
    perms, _ = perm_table(n)
    return GalleryInstance("transpose_i_random", {"n": n, "i": i, "lazy": lazy}, [K],
                           {"uniform": Measure.uniform(len(perms))}, consts,
                           labels=["".join(str(v + 1) for v in p) for p in perms])


def symmetric_perturbation(n, i, epsilon, seed=0):
    """A random symmetric kernel ``K`` with ``(1 - eps) Q_i <= K <= (1 + eps) Q_i`` entrywise.

    Off-diagonal entries are ``Q_i(x, y)(1 + eps xi(x, y))`` with ``xi``
    symmetric and uniform on ``[-1, 1]``; the diagonal takes up the rest,
    which always stays inside the envelope because ``Q_i`` holds at least
    half its mass.
    """
    if not 0 <= epsilon < 1:
        raise ValidationError("epsilon must lie in [0, 1)")
    Q = transpose_i_kernel(n, i, lazy=True).matrix
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-1.0, 1.0, size=Q.shape)
    xi = np.triu(xi, 1)
    xi = xi + xi.T
    a = Q * (1.0 + epsilon * xi)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, 1.0 - a.sum(axis=1))
    K = _finish(a)
    consts = {
        "sigma1_bound": Constant(1 - (1 - epsilon) / (2 * n), "paper", "sigma_1(K, u) upper bound"),
        "mls_check_lower": Constant((1 - epsilon) ** 2 / (4 * (n - 1)), "paper",
                                    "lower bound on l'(K K*) via comparison with Q_j^2"),
    }
    perms, _ = perm_table(n)
    return GalleryInstance("symmetric_perturbation", {"n": n, "i": i, "epsilon": epsilon, "seed": seed},
                           [K], {"uniform": Measure.uniform(len(perms))}, consts)


def _conjugation_index(n, power):
    """Index map ``x -> s^power x s^-power`` with ``s`` the cycle ``k -> k + 1 mod n``."""
    perms, rank = perm_table(n)
    s = tuple((k + 1) % n for k in range(n))
    sp = tuple(range(n))
    for _ in range(power % n):
        sp = compose_perm(s, sp)
    spi = inverse_perm(sp)
    return np.array([rank[compose_perm(compose_perm(sp, x), spi)] for x in perms])


def sticky_base(n, rho_index, delta):
    """``Q_1`` with extra holding ``delta`` at ``rho`` taken evenly from its ``(1 j)`` moves."""
    Q = transpose_i_kernel(n, 1, lazy=True).matrix
    stay = Q[rho_index, rho_index]
    if not 0 <= delta < 1 - stay:
        raise DeltaTooLarge(f"delta must lie in [0, {1 - stay})")
    a = Q.copy()
    a[rho_index, rho_index] += delta
    moves = np.flatnonzero(Q[rho_index] > 0)
    moves = moves[moves != rho_index]
    a[rho_index, moves] -= delta / (n - 1)
    return _finish(a), float(delta / (1 - stay))


def sticky_permutation(n, rho_index, delta, i=1):
    """The ``i``-th kernel of the sticky sequence: the base conjugated by the cycle ``i - 1`` times.

    The direction is chosen so that ``delta = 0`` gives ``Q_i`` under the
    composition convention of :func:`compose_perm`.
    """
    K, eps = sticky_base(n, rho_index, delta)
    idx = _conjugation_index(n, 1 - i)
    Ki = Kernel(K.matrix[np.ix_(idx, idx)])
    # invariant measure of K~(x, y) = K(x, s^-1 y s)
    tw = _conjugation_index(n, 1)
    twisted = K.matrix[:, tw]
    pi_t = invariant_measure(twisted)
    perms, _ = perm_table(n)
    consts = {
        "epsilon": Constant(eps, "paper", "delta / sum_{z != rho} Q_1(rho, z)"),
        "stability": Constant(1 / (1 - eps), "paper", "w.r.t. the twisted invariant measure"),
        "mls_check_lower": Constant((1 - eps) ** 5 / (4 * (n - 1)), "paper", "lower bound on l'(K_i K_i*)"),
    }
    return GalleryInstance("sticky_permutation", {"n": n, "rho": rho_index, "delta": delta, "i": i},
                           [Ki], {"twisted_invariant": pi_t, "uniform": Measure.uniform(len(perms))},
                           consts)


def sticky_sequence(n, rho_index, delta):
    """The ``n`` distinct kernels ``K_1..K_n`` (the sequence has period ``n``) and its start measure."""
    inst = [sticky_permutation(n, rho_index, delta, i) for i in range(1, n + 1)]
    return [g.kernel for g in inst], inst[0].measures["twisted_invariant"], inst[0].constants


# --- opposite drifts ----------------------------------------------------------------------

def biased_walk(N, beta, direction=1):
    """Lazy walk on ``{0..N}`` with drift ``direction * beta``; blocked moves become holding."""
    if not 0 <= beta < 1:
        raise ValidationError("beta must lie in [0, 1)")
    n = N + 1
    up = (1 + direction * beta) / 4
    down = (1 - direction * beta) / 4
    a = np.zeros((n, n))
    for x in range(n):
        if x < N:
            a[x, x + 1] = up
        if x > 0:
            a[x, x - 1] = down
        a[x, x] = 1.0 - a[x].sum()
    return _finish(a)
