"""Executable merging bounds.

Every function takes measured or user-supplied inputs (singular values,
log-Sobolev constants, Nash constants) and returns the bound value.  The
domination guarantee only holds when those inputs are exact or are valid
lower bounds for log-Sobolev-type constants and upper bounds for singular
values; :class:`BoundReport` keeps a checklist recording which was the case.

Sequences such as ``sigmas`` are indexed by step: ``sigmas[i - 1]`` belongs
to ``K_i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import check_measure, check_schedule, evolve, iter_products
from .distances import lp_norm
from .exceptions import (
    HorizonTooShort,
    Reducible,
    MissingSigma,
    NeverReached,
    RangeViolation,
    ThresholdNotMet,
    ValidationError,
)
from .functional import Certificate, NashParams, log_sobolev_lower_bound, rho_lower_bound
from .spectral import reversibilization

EXACT_KINDS = ("exact", "exact-small", "paper-constant", "comparison-lower-bound", "user-supplied")


@dataclass
class BoundReport:
    """A bound evaluated along a run, next to the exact quantity it controls."""

    theorem: str
    steps: np.ndarray
    bound: np.ndarray
    exact: np.ndarray
    hypotheses: dict = field(default_factory=dict)
    quantity: str = "d2"

    @property
    def slack(self):
        return np.asarray(self.bound, dtype=float) - np.asarray(self.exact, dtype=float)

    @property
    def inputs_exact(self):
        return all(v in EXACT_KINDS for v in self.hypotheses.values())

    def min_slack(self):
        s = self.slack
        s = s[np.isfinite(s)]
        return float(s.min()) if s.size else math.inf

    def dominates(self, tol=1e-8):
        return self.min_slack() >= -tol

    def to_csv(self):
        lines = ["n,bound,exact,slack"]
        for n, b, e, s in zip(self.steps, self.bound, self.exact, self.slack):
            lines.append(f"{int(n)},{b:.17g},{e:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "quantity": self.quantity,
            "hypotheses": self.hypotheses,
            "inputs_exact": self.inputs_exact,
            "min_slack": self.min_slack(),
            "rows": [{"n": int(n), "bound": float(b), "exact": float(e)}
                     for n, b, e in zip(self.steps, self.bound, self.exact)],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


class NashBound(NamedTuple):
    d2: float
    sup: float  # NaN when n < 2m


def log_plus(x):
    return max(math.log(x), 0.0) if x > 0 else 0.0


def _prod(values, lo, hi):
    """``prod_{i=lo}^{hi} values[i - 1]``; empty ranges give 1."""
    if hi < lo:
        return 1.0
    if hi > len(values):
        raise MissingSigma(f"need values up to step {hi}, have {len(values)}")
    return float(np.prod(np.asarray(values[lo - 1:hi], dtype=float)))


# --- Nash-based bounds ------------------------------------------------------------

def nash_b_constant(params: NashParams):
    return (1.0 + 1.0 / params.N) * (1.0 + math.ceil(4.0 * params.D))


def nash_norm_bound(params: NashParams, n, m):
    """``(4 C B / (n - m + 1))^D`` bounding the ``l^1 -> l^2`` and ``l^2 -> l^inf`` norms of ``K_{m,n}``."""
    if not 0 <= m <= n <= params.N:
        raise RangeViolation(f"need 0 <= m <= n <= N, got m={m}, n={n}, N={params.N}")
    return (4.0 * params.C * nash_b_constant(params) / (n - m + 1)) ** params.D


def _nash_pair(C_eff, D, factors, n, m):
    pre = (8.0 * C_eff * (1.0 + math.ceil(4.0 * D)) / (m + 1)) ** D
    d2 = pre * _prod(factors, m + 1, n)
    u = n - 2 * m
    sup = pre * pre * _prod(factors, m + 1, m + u) if u >= 0 else math.nan
    return NashBound(d2, sup)


def _check_m(params, n, m):
    if not 0 <= m <= params.N:
        raise RangeViolation(f"need 0 <= m <= N, got m={m}, N={params.N}")
    if n < m:
        raise RangeViolation(f"need n >= m, got n={n}, m={m}")


def nash_d2_bound(params: NashParams, sigmas, n, m):
    """Nash plus singular values.

    ``d2`` bounds ``max_x d_2(K_{0,n}(x, .), mu_n)``; ``sup`` bounds the
    centred relative-sup distance when ``n = 2m + u`` with ``u >= 0``.
    ``sigmas[i - 1] = sigma_1(K_i, mu_{i-1})``.
    """
    _check_m(params, n, m)
    return _nash_pair(params.C, params.D, sigmas, n, m)


def stab_factors(sigmas, c, power=2):
    """``(1 - (1 - sigma^2) / c^power)^{1/2}`` elementwise."""
    s = np.asarray(sigmas, dtype=float)
    return np.sqrt(np.clip(1.0 - (1.0 - s * s) / c**power, 0.0, None))


def nash_stab_bound(params: NashParams, c, sigmas0, n, m):
    """c-stable variant using ``sigma(K_i, mu_0)`` measured against the fixed ``mu_0``."""
    if c < 1:
        raise ValidationError("stability constant must be >= 1")
    _check_m(params, n, m)
    C_eff = params.C * c ** (2.0 + 3.0 / (2.0 * params.D))
    return _nash_pair(C_eff, params.D, stab_factors(sigmas0, c, 2), n, m)


def nash_stab2_bound(params: NashParams, c, sigmas_pi, n, m):
    """c-stable variant using ``sigma_1(K_i)`` on ``l^2(pi_i)`` of each kernel's own invariant measure."""
    if c < 1:
        raise ValidationError("stability constant must be >= 1")
    _check_m(params, n, m)
    C_eff = params.C * c ** (4.0 + 3.0 / params.D)
    return _nash_pair(C_eff, params.D, stab_factors(sigmas_pi, c, 4), n, m)


def best_over_m(bound_fn, params: NashParams, n, *args, which="d2"):
    """Minimize a Nash bound over the free split ``m in [0, min(N, n)]``."""
    best = math.inf
    for m in range(0, min(params.N, n) + 1):
        val = getattr(bound_fn(params, *args, n, m), which)
        if val < best:
            best = val
    return best


# --- log-Sobolev bounds -------------------------------------------------------------

def _threshold_target(mass):
    """``log log(mass^{-1/2})``, or ``None`` when the threshold is trivially met."""
    if not 0 < mass:
        raise ValidationError("mass must be positive")
    inner = -0.5 * math.log(mass)
    if inner <= 1.0:
        return None
    return math.log(inner)


def ls_threshold(ls_constants, mu0x):
    """First ``t`` with ``sum_{i<=t} log(1 + l_i) >= log log(mu0x^{-1/2})``; 0 if the target is <= 0."""
    target = _threshold_target(mu0x)
    if target is None:
        return 0
    l = np.asarray(ls_constants, dtype=float)
    if l.size == 0 or not np.any(l > 0):
        raise NeverReached("all log-Sobolev constants vanish")
    cum = np.cumsum(np.log1p(l))
    hit = np.flatnonzero(cum >= target)
    if hit.size == 0:
        raise NeverReached(f"threshold {target:.4g} not reached within {l.size} steps")
    return int(hit[0]) + 1


def ls_tail_threshold(ls_constants, mass, n):
    """First ``t`` with ``sum_{i=n-t+1}^{n} log(1 + l_i) >= log log(mass^{-1/2})``."""
    target = _threshold_target(mass)
    if target is None:
        return 0
    l = np.asarray(ls_constants[:n], dtype=float)[::-1]
    if len(ls_constants) < n:
        raise MissingSigma(f"need constants up to step {n}")
    if l.size == 0 or not np.any(l > 0):
        raise NeverReached("all log-Sobolev constants vanish")
    cum = np.cumsum(np.log1p(l))
    hit = np.flatnonzero(cum >= target)
    if hit.size == 0:
        raise NeverReached(f"threshold {target:.4g} not reached within {n} steps")
    return int(hit[0]) + 1


def discount(ls_constants, c, power=2):
    """Constants ``c^{-power} l`` for the c-stable threshold variants."""
    return np.asarray(ls_constants, dtype=float) / c**power


def ls_d2_bound(ls_constants, sigmas, mu0x, n):
    """Bound on ``d_2(K_{0,n}(x, .), mu_n)^2``: ``e^2 prod_{m_x+1}^n sigma_1(K_i, mu_{i-1})^2``."""
    m = ls_threshold(ls_constants, mu0x)
    if n < m:
        raise ThresholdNotMet(f"n={n} is below the threshold m_x={m}")
    return math.e**2 * _prod(sigmas, m + 1, n) ** 2


class LSSupBound(NamedTuple):
    value: float
    m0: int
    mn: int

    @property
    def m(self):
        return max(self.m0, self.mn)


def ls_sup_bound(ls_P, ls_Pcheck, sigmas, mu0_min, mun_min, n):
    """Bound on ``max_{x,y} |K_{0,n}(x,y)/mu_n(y) - 1|``: ``e^2 prod_{m+1}^{n-m} sigma_1``.

    ``m = max(m0, mn)``; ``m0`` uses the ``l(P_i)`` from the start and
    ``mn`` the ``l(P_check_i)`` counted backwards from step ``n``, so ``m``
    depends on ``n``.
    """
    m0 = ls_threshold(ls_P, mu0_min)
    mn = ls_tail_threshold(ls_Pcheck, mun_min, n)
    m = max(m0, mn)
    if n < 2 * m:
        raise HorizonTooShort(f"need n >= 2m = {2 * m}, got n={n}")
    return LSSupBound(math.e**2 * _prod(sigmas, m + 1, n - m), m0, mn)


def cor_sob_norm_check(schedule, mu0, q0, n, ls_constants=None, trials=500, seed=0):
    """Falsification test of ``||K_{0,n} f||_{l^q(mu_0)} <= ||f||_{l^q0(mu_n)}`` with ``q = q0 prod (1 + l_i)``.

    ``ls_constants[i - 1]`` must be a lower bound for ``l(P_i)``; by default
    the rigorous spectral-gap comparison bound is used (0 for reducible
    ``P_i``).
    """
    if q0 < 2:
        raise ValidationError("q0 must be at least 2")
    schedule = check_schedule(schedule)
    mus = evolve(check_measure(mu0, schedule.size, positive=True), schedule, n)
    if ls_constants is None:
        ls_constants = []
        for i in range(1, n + 1):
            try:
                P = reversibilization(schedule.matrix(i), mus[i - 1])
                ls_constants.append(log_sobolev_lower_bound(P, mus[i]).value)
            except Reducible:
                ls_constants.append(0.0)
    q = q0 * float(np.prod(1.0 + np.asarray(ls_constants[:n], dtype=float)))
    for _, prod in iter_products(schedule, n):
        pass
    rng = np.random.default_rng(seed)
    size = schedule.size
    F = np.vstack([np.eye(size) + 1e-3, np.exp(rng.standard_normal((trials, size)) * 2.0)])
    ratios = lp_norm(F @ prod.T, mus[0], q) / lp_norm(F, mus[n], q0)
    j = int(np.argmax(ratios))
    passed = bool(ratios[j] <= 1.0 + 1e-12)
    return Certificate("sobolev-norm", float(ratios[j]), passed, trials, seed,
                       None if passed else F[j], {"q0": q0, "q": q, "n": n})


# --- entropy bound ---------------------------------------------------------------------

def entropy_tv_bound(mls_constants, mu0_min, n, rho=None):
    """``sqrt(2 log(1/mu0_min)) prod_{i<=n} (1 - rho l'_i)^{1/2}``, bounding max pairwise TV."""
    rho = rho_lower_bound() if rho is None else rho
    if not 0 < rho <= 1:
        raise ValidationError("rho must lie in (0, 1]")
    l = np.asarray(mls_constants, dtype=float)
    if n > l.size:
        raise MissingSigma(f"need constants up to step {n}")
    factors = np.clip(1.0 - rho * l[:n], 0.0, None)
    return math.sqrt(2.0 * math.log(1.0 / mu0_min)) * math.sqrt(float(np.prod(factors)))


def singular_tv_bound(sigmas, mu0_min, n):
    """``mu0_min^{-1/2} prod_{i<=n} sigma_1(K_i, mu_{i-1})``, bounding ``max_x d_2`` and hence max pairwise TV."""
    return _prod(sigmas, 1, n) * math.sqrt((1.0 - mu0_min) / mu0_min)


def quadratic_merging_bound(A, N, eps):
    """``A N^2 (1 + log_+(1/eps))``: the shape of the c-stable relative-sup merging-time bounds."""
    return A * N * N * (1.0 + log_plus(1.0 / eps))


def first_below(values, eps):
    """First index at which ``values`` is strictly below ``eps``; ``None`` if never."""
    v = np.asarray(values, dtype=float)
    hit = np.flatnonzero(v < eps)
    return int(hit[0]) if hit.size else None
