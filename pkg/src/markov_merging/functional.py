"""Functional-inequality constants: entropies, log-Sobolev and modified log-Sobolev
constants, entropy contraction, Nash certification and hypercontractivity checks.

Infimum-type constants are estimated numerically and reported with a
``kind`` flag.  Numeric estimates are upper bounds on the true constant (they
are values of the Rayleigh-type ratio at some witness), so they must never be
fed to a bound that requires a lower bound without saying so.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.special import binom, kl_div, xlog1py, xlogy

from .core import check_kernel, check_measure, check_reversible, is_irreducible
from .distances import lp_norm
from .exceptions import (
    NoAdmissibleWitness,
    NotReversible,
    Reducible,
    ValidationError,
    ZeroFunction,
)
from .spectral import reversible_spectrum

LS_KINDS = ("exact-small", "multistart-numeric", "comparison-lower-bound")
# relative entropy below this (for unit-norm f) is dominated by rounding
ENTROPY_FLOOR = 1e-7


@dataclass
class Certificate:
    """Outcome of a randomized falsification check."""

    kind: str
    value: float
    passed: bool
    trials: int
    seed: int | None = None
    witness: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"kind": self.kind, "value": _num(self.value), "trials": self.trials,
               "seed": self.seed, "pass": bool(self.passed)}
        if self.witness is not None:
            out["witness"] = np.asarray(self.witness).tolist()
        if self.details:
            out["details"] = self.details
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


@dataclass(frozen=True)
class NashParams:
    C: float
    D: float
    N: int

    def __post_init__(self):
        if not (self.C > 0 and self.D > 0):
            raise ValidationError("Nash constants C and D must be positive")
        if int(self.N) < 1 or int(self.N) != self.N:
            raise ValidationError("Nash time cutoff N must be a positive integer")


@dataclass
class LogSobolevEstimate:
    """A log-Sobolev-type constant together with how it was obtained.

    When ``limit`` is true the value is the near-constant limit of the ratio
    (half the spectral gap for ``l``, twice the gap for ``l'``) and
    ``witness`` is the direction ``psi`` of the family ``1 + t psi``,
    ``t -> 0``, rather than a function attaining the value.
    """

    value: float
    kind: str
    witness: np.ndarray | None = None
    converged: bool = True
    limit: bool = False
    gap: float | None = None

    def __post_init__(self):
        if self.kind not in LS_KINDS:
            raise ValidationError(f"unknown estimate kind {self.kind!r}")
        if self.value < 0:
            raise ValidationError("constant must be nonnegative")


# --- entropies ---------------------------------------------------------------------

def l2_entropy(f, nu):
    """``L(f^2, nu) = sum f^2 log(f^2 / ||f||^2) nu``, with ``0 log 0 = 0``."""
    f = np.asarray(f, dtype=np.float64)
    w = check_measure(nu, f.size, positive=True)
    sq = f * f
    norm2 = float(sq @ w)
    if norm2 == 0:
        raise ZeroFunction("f vanishes identically")
    return max(float(xlogy(sq, sq / norm2) @ w), 0.0)


def relative_entropy(mu, nu):
    """``Ent_nu(mu) = sum mu log(mu / nu)``; zero-mass states of ``mu`` contribute 0.

    Summed as ``sum (mu log(mu / nu) - mu + nu)``, equal for probability
    vectors, whose terms are nonnegative and second order in ``mu - nu``.
    """
    a = np.asarray(mu, dtype=np.float64)
    b = check_measure(nu, a.size, positive=True)
    return float(np.sum(kl_div(a, b)))


# --- log-Sobolev constants -----------------------------------------------------

def _prepare_reversible(P, pi):
    a = check_kernel(P)
    w = check_measure(pi, a.shape[0], positive=True)
    ok, viol = check_reversible(a, w)
    if not ok:
        raise NotReversible(viol)
    if not is_irreducible(a):
        raise Reducible("log-Sobolev constants need an irreducible kernel")
    if a.shape[0] < 2:
        raise NoAdmissibleWitness("a one-state space has no nonconstant functions")
    return a, w


def _ls_objective(g, a, w, lap):
    """Ratio ``E(f, f) / L(f^2)`` at ``f = exp(g)`` and its gradient in ``g``."""
    g = g - g.max()
    f = np.exp(g)
    norm2 = float((f * f) @ w)
    f = f / math.sqrt(norm2)
    lf = lap @ f
    energy = float(f @ lf)
    # log f^2 from g directly, so underflowed entries stay finite
    logsq = 2.0 * g - math.log(norm2)
    ent = float((f * f * logsq) @ w)
    if ent <= 1e-14:
        return math.inf, np.zeros_like(g)
    ratio = energy / ent
    d_energy = 2.0 * lf
    d_ent = 2.0 * w * f * logsq
    grad = f * (d_energy - ratio * d_ent) / ent
    return ratio, grad


def _mls_objective(g, a, w, lap):
    """Ratio ``E(h, log h) / L(h)`` at ``h = exp(g)`` (so ``f^2 = h``)."""
    g = g - g.max()
    h = np.exp(g)
    mass = float(h @ w)
    h = h / mass
    g = g - math.log(mass)
    pair = float(h @ (lap @ g))
    ent = float((h * g) @ w)
    if ent <= 1e-14:
        return math.inf, np.zeros_like(g)
    ratio = pair / ent
    d_pair = h * (lap @ g) + lap @ h
    d_ent = h * w * g
    return ratio, (d_pair - ratio * d_ent) / ent


def _starts(n, w, psi, count, rng):
    """Deterministic mix of spiky, smooth and random starting points in log scale."""
    starts = []
    for x in np.argsort(w)[: max(1, count // 4)]:
        g = np.zeros(n)
        g[x] = 3.0
        starts.append(g)
    for t in (0.5, 2.0, 6.0):
        starts.append(t * psi / max(np.abs(psi).max(), 1e-300))
        starts.append(-t * psi / max(np.abs(psi).max(), 1e-300))
    scales = (0.3, 1.0, 3.0)
    k = 0
    while len(starts) < count:
        starts.append(scales[k % 3] * rng.standard_normal(n))
        k += 1
    return starts[:count]


def _multistart(objective, a, w, starts):
    # the Dirichlet operator D(I - P) is symmetric for reversible P
    lap = w[:, None] * (np.eye(a.shape[0]) - a)
    lap = 0.5 * (lap + lap.T)
    best, best_g, converged = math.inf, None, False
    for g0 in starts:
        res = scipy.optimize.minimize(objective, g0, args=(a, w, lap), jac=True,
                                      method="L-BFGS-B", options={"maxiter": 500, "gtol": 1e-10})
        val, _ = objective(res.x, a, w, lap)
        f = np.exp(res.x - res.x.max())
        f /= math.sqrt(float((f * f) @ w))
        if l2_entropy(f, w) < ENTROPY_FLOOR:
            continue
        if val < best:
            best, best_g, converged = val, res.x, bool(res.success)
    return best, best_g, converged


def _two_state_ls(a, w):
    p01 = a[0, 1]
    if abs(w[0] - w[1]) < 1e-15:
        return 0.5 * p01 / w[1]
    return (p01 / w[1]) * (w[1] - w[0]) / (math.log(w[1]) - math.log(w[0]))


def log_sobolev_constant(P, pi, starts=64, seed=0, method="auto"):
    """Estimate ``l(P) = inf E(f, f) / L(f^2, pi)`` for reversible ``P``.

    Two-state chains use the closed form.  Larger chains run a multistart
    quasi-Newton search over positive ``f`` and report the smaller of the
    best ratio found and ``gap / 2`` (the value approached by ``f -> 1``),
    which is an upper bound on ``l(P)``.
    """
    a, w = _prepare_reversible(P, pi)
    lam, psi = reversible_spectrum(a, w, method, check=False)
    gap = float(1.0 - lam[1])
    if a.shape[0] == 2:
        return LogSobolevEstimate(_two_state_ls(a, w), "exact-small", psi[:, 1], True, False, gap)
    rng = np.random.default_rng(seed)
    best, g, converged = _multistart(_ls_objective, a, w, _starts(a.shape[0], w, psi[:, 1], starts, rng))
    if best < 0.5 * gap:
        f = np.exp(g - g.max())
        return LogSobolevEstimate(best, "multistart-numeric", f / math.sqrt(float((f * f) @ w)),
                                  converged, False, gap)
    return LogSobolevEstimate(0.5 * gap, "multistart-numeric", psi[:, 1], converged, True, gap)


def mls_constant(P, pi, starts=64, seed=0, method="auto"):
    """Estimate ``l'(P) = inf E(f^2, log f^2) / L(f^2, pi)``; near-constant limit is ``2 gap``."""
    a, w = _prepare_reversible(P, pi)
    lam, psi = reversible_spectrum(a, w, method, check=False)
    gap = float(1.0 - lam[1])
    rng = np.random.default_rng(seed)
    best, g, converged = _multistart(_mls_objective, a, w, _starts(a.shape[0], w, psi[:, 1], starts, rng))
    if best < 2.0 * gap:
        f = np.exp(0.5 * (g - g.max()))
        return LogSobolevEstimate(best, "multistart-numeric", f / math.sqrt(float((f * f) @ w)),
                                  converged, False, gap)
    return LogSobolevEstimate(2.0 * gap, "multistart-numeric", psi[:, 1], converged, True, gap)


def log_sobolev_lower_bound(P, pi, method="auto"):
    """Rigorous lower bound ``l >= gap (1 - 2 pi_min) / log(1 / pi_min - 1)``."""
    a, w = _prepare_reversible(P, pi)
    lam, _ = reversible_spectrum(a, w, method, check=False)
    gap = float(1.0 - lam[1])
    pmin = float(w.min())
    factor = 0.5 if abs(pmin - 0.5) < 1e-15 else (1.0 - 2.0 * pmin) / math.log(1.0 / pmin - 1.0)
    return LogSobolevEstimate(gap * factor, "comparison-lower-bound", None, True, False, gap)


def ls_ratio(P, pi, f):
    """``E(f, f) / L(f^2, pi)``."""
    from .spectral import dirichlet_form

    return dirichlet_form(P, pi, f, check=False) / l2_entropy(f, pi)


def mls_ratio(P, pi, f):
    """``E(f^2, log f^2) / L(f^2, pi)`` for positive ``f``."""
    from .spectral import dirichlet_form

    f = np.asarray(f, dtype=np.float64)
    sq = f * f
    return dirichlet_form(P, pi, sq, np.log(sq), check=False) / l2_entropy(f, pi)


# --- entropy contraction ---------------------------------------------------------

def entropy_contraction(K, nu, samples=500, seed=0):
    """Upper estimate of the entropy contraction coefficient of ``K`` relative to ``nu``.

    Returns ``1 - max Ent_{nu K}(mu K) / Ent_nu(mu)`` over point masses,
    Dirichlet draws and small perturbations of ``nu``.
    """
    a = check_kernel(K)
    w = check_measure(nu, a.shape[0], positive=True)
    n = a.shape[0]
    if n == 1:
        return 1.0
    img = w @ a
    rng = np.random.default_rng(seed)
    cands = [np.eye(n)]
    cands.append(rng.dirichlet(np.full(n, 0.3), size=samples))
    cands.append(rng.dirichlet(np.full(n, 3.0), size=samples))
    dirs = rng.standard_normal((samples, n))
    dirs -= (dirs @ w)[:, None]
    dirs /= np.abs(dirs).max(axis=1, keepdims=True)
    cands.append(w * (1.0 + 0.05 * dirs))
    mus = np.vstack(cands)
    worst = 0.0
    for mu in mus:
        ent = relative_entropy(mu, w)
        if ent < 1e-10:
            continue
        worst = max(worst, relative_entropy(mu @ a, img) / ent)
    return float(min(max(1.0 - worst, 0.0), 1.0))


# --- scalar helpers ------------------------------------------------------------------

def g_function(q, nu):
    """``((1 + nu)^q - 1 - q nu) / ((1 + nu)^(q/2) - 1)^2`` with its ``nu -> 0`` limit.

    Small ``nu`` goes through the binomial series of both numerator and
    denominator to avoid cancellation.
    """
    if q < 2 or nu < 0:
        raise ValidationError("need q >= 2 and nu >= 0")
    if q == 2:
        return 1.0
    if nu <= 0.1:
        k = np.arange(2, 60)
        num = np.sum(binom(q, k) * nu ** (k - 2))
        half = np.sum(binom(q / 2.0, k - 1) * nu ** (k - 2))
        return float(num / half**2)
    lq = math.log1p(nu)
    num = math.expm1(q * lq) - q * nu
    den = math.expm1(0.5 * q * lq) ** 2
    return num / den


def nu_of_kernel(K):
    """``max {1 / K(x, y) : K(x, y) > 0} - 1``."""
    a = np.asarray(K, dtype=np.float64)
    pos = a[a > 0]
    if pos.size == 0:
        raise ValidationError("kernel has no positive entry")
    return float(1.0 / pos.min() - 1.0)


def phi(x):
    """``(1 + x) log(1 + x) - x``, extended by continuity to ``phi(-1) = 1``."""
    x = np.asarray(x, dtype=np.float64)
    return xlog1py(1.0 + x, x) - x


def phi_gap(x):
    """``phi(x) - 2 phi(x / 2) / (1 - log 2)``; nonpositive on ``[-1, inf)``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < -1):
        raise ValidationError("phi_gap is defined for x >= -1")
    out = phi(x) - (2.0 / (1.0 - math.log(2.0))) * phi(0.5 * x)
    return float(out) if out.ndim == 0 else out


def rho_lower_bound():
    """Lower bound ``log 2 (1 - log 2) / 2`` on the entropy-contraction constant."""
    return math.log(2.0) * (1.0 - math.log(2.0)) / 2.0


# --- Nash inequality ------------------------------------------------------------------

def nash_ratio(P, pi, f, params: NashParams, energy=None):
    """``||f||_2^{2 + 1/D} / ((E(f, f) + ||f||_2^2 / N) ||f||_1^{1/D})``."""
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(pi, dtype=np.float64)
    a = np.asarray(P, dtype=np.float64)
    n2 = float(np.sqrt((f * f) @ w))
    n1 = float(np.abs(f) @ w)
    if n1 == 0:
        raise ZeroFunction("f vanishes identically")
    if energy is None:
        diff = f[:, None] - f[None, :]
        energy = 0.5 * float(np.sum(diff * diff * w[:, None] * a))
    # logs keep huge exponents 1/D finite
    log_num = (2.0 + 1.0 / params.D) * math.log(n2)
    log_den = math.log(energy + n2 * n2 / params.N) + math.log(n1) / params.D
    return math.exp(log_num - log_den)


def _graph_balls(a):
    """Indicators of every graph ball ``B(x, r)`` in the support graph of ``a``."""
    from scipy.sparse.csgraph import shortest_path

    dist = shortest_path(a > 0, unweighted=True)
    balls = []
    for x in range(a.shape[0]):
        for r in np.unique(dist[x][np.isfinite(dist[x])]):
            balls.append((dist[x] <= r).astype(np.float64))
    return balls


def nash_family(P, pi, trials, seed, method="auto"):
    """The deterministic test family used by :func:`nash_certify`."""
    a = np.asarray(P, dtype=np.float64)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    fam = list(np.eye(n))
    fam.extend(_graph_balls(a))
    _, psi = reversible_spectrum(a, pi, method, check=False)
    for k in range(1, n):
        v = psi[:, k]
        fam.extend([v, np.clip(v, 0, None), np.clip(-v, 0, None)])
    fam.extend(rng.standard_normal((trials, n)))
    fam.extend(np.abs(rng.standard_normal((trials, n))) ** 4)
    return [f for f in fam if np.any(f != 0)]


def nash_certify(P, pi, params: NashParams, trials=200, seed=0, method="auto"):
    """Test the Nash inequality with constants ``params`` on a deterministic family.

    ``value`` is the largest ratio observed (a lower bound on the best
    constant).  FAIL is conclusive and comes with a witness; PASS is evidence.
    """
    a = check_kernel(P)
    w = check_measure(pi, a.shape[0], positive=True)
    ok, viol = check_reversible(a, w)
    if not ok:
        raise NotReversible(viol)
    best, witness = 0.0, None
    for f in nash_family(a, w, trials, seed, method):
        r = nash_ratio(a, w, f, params)
        if r > best:
            best, witness = r, f
    passed = best <= params.C * (1 + 1e-12)
    return Certificate("nash", best, passed, trials, seed, None if passed else witness,
                       {"C": params.C, "D": params.D, "N": params.N})


def nash_safe_constant(pi, D, N):
    """A constant valid for every chain on ``pi``: ``N pi_min^{-1/(2D)}``.

    Follows from ``||f||_2 <= pi_min^{-1/2} ||f||_1`` and ``E >= 0``.
    """
    w = check_measure(pi, positive=True)
    return float(N * w.min() ** (-1.0 / (2.0 * D)))


# --- hypercontractivity -------------------------------------------------------------

def hypercontractivity_check(K, mu, q0, ls_value, trials=500, seed=0, q=None):
    """Falsification test of ``||K f||_{l^q(mu)} <= ||f||_{l^q0(mu K)}`` on random positive ``f``.

    ``q`` defaults to ``(1 + ls_value) q0`` where ``ls_value`` is a
    log-Sobolev constant for ``K* K``.
    """
    if q0 < 2:
        raise ValidationError("q0 must be at least 2")
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    img = w @ a
    q = (1.0 + ls_value) * q0 if q is None else q
    rng = np.random.default_rng(seed)
    F = np.vstack([np.eye(a.shape[0]) + 1e-3, np.exp(rng.standard_normal((trials, a.shape[0])) * 2.0)])
    worst, witness = 0.0, None
    for f in F:
        r = float(lp_norm(a @ f, w, q) / lp_norm(f, img, q0))
        if r > worst:
            worst, witness = r, f
    passed = worst <= 1.0 + 1e-12
    return Certificate("hypercontractivity", worst, passed, trials, seed,
                       None if passed else witness, {"q0": q0, "q": q})
