"""Distances between measures, weighted operator norms, and the exact merging-time oracle."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .core import check_kernel, check_measure, check_schedule, iter_products
from .exceptions import EpsTooLarge, UnsupportedPair, ValidationError, ZeroImageMass, ZeroReference

SUPPORTED_PAIRS = {(1, 1), (1, 2), (1, math.inf), (2, 2), (2, math.inf), (math.inf, math.inf)}


def _norm_p(p):
    p = float(p)
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    return p


def lp_norm(f, mu, p):
    """``||f||_{l^p(mu)}``; ``p = inf`` gives the max over the support of ``mu``."""
    f = np.asarray(f, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    p = _norm_p(p)
    a = np.abs(f)
    if math.isinf(p):
        out = np.max(a[..., mu > 0], axis=-1, initial=0.0)
    else:
        out = np.sum(a**p * mu, axis=-1) ** (1.0 / p)
    return float(out) if out.ndim == 0 else out


def tv_distance(mu, nu):
    """Total variation distance ``sup_A |mu(A) - nu(A)|``."""
    a = np.asarray(mu, dtype=np.float64)
    b = np.asarray(nu, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError("measures live on different spaces")
    return 0.5 * float(np.abs(a - b).sum())


def _ratio_deviation(rows, mu):
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu <= 0):
        raise ZeroReference(f"reference measure vanishes at state {int(np.argmin(mu))}")
    return np.abs(np.asarray(rows, dtype=np.float64) / mu - 1.0)


def dp_distance(nu, mu, p):
    """``d_p(nu, mu) = ||nu/mu - 1||_{l^p(mu)}``.  Not symmetric; ``mu`` must be positive."""
    dev = _ratio_deviation(nu, mu)
    return float(lp_norm(dev, mu, p))


def max_dp_to_target(K, mu, p):
    """``max_x d_p(K(x, .), mu)`` for every row of ``K`` at once."""
    dev = _ratio_deviation(K, mu)
    p = _norm_p(p)
    if math.isinf(p):
        return float(dev.max())
    return float(np.max(lp_norm(dev, mu, p)))


def relsup_pairwise(K):
    """``max_{x,y,z} |K(x,z)/K(y,z) - 1|`` with ``0/0 = 1`` and ``a/0 = inf``.

    For a fixed column the worst pair is (largest entry, smallest entry), so
    only column extremes are needed.
    """
    a = np.asarray(K, dtype=np.float64)
    hi = a.max(axis=0)
    lo = a.min(axis=0)
    if np.any((lo == 0) & (hi > 0)):
        return math.inf
    live = hi > 0
    if not np.any(live):
        return 0.0
    return float(np.max(hi[live] / lo[live]) - 1.0)


def tv_pairwise(K):
    """``max_{x,y} ||K(x,.) - K(y,.)||_TV``."""
    a = np.asarray(K, dtype=np.float64)
    if a.shape[0] < 2:
        return 0.0
    return 0.5 * float(pdist(a, "cityblock").max())


def center_to_pairwise(eps):
    """Pairwise relative-sup level implied by a centred level ``eps <= 1/2``."""
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    if eps > 0.5:
        raise EpsTooLarge(f"conversion needs eps <= 1/2, got {eps}")
    return 4.0 * eps


# --- operator norms -------------------------------------------------------------

def operator_norm(A, mu, p, q, source=None, centered=False):
    """Norm of ``A`` as an operator ``l^p(source) -> l^q(mu)``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Kernel or any real matrix acting on functions by ``(Af)(x) = sum_y A(x, y) f(y)``.
    mu : array_like
        Positive target weight.
    p, q : {1, 2, inf}
        Only the endpoint pairs with closed forms are supported.
    source : array_like, optional
        Source weight; defaults to ``mu @ A``, the natural image measure for a kernel.
    centered : bool
        Replace ``A`` by ``A - 1 source^T``, i.e. ``f -> Af - source(f)``.
    """
    pair = (float(p), float(q))
    pair = tuple(int(v) if not math.isinf(v) else math.inf for v in pair)
    if pair not in SUPPORTED_PAIRS:
        raise UnsupportedPair(p, q)
    a = np.asarray(A, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu <= 0):
        raise ZeroReference("target weight must be positive")
    nu = mu @ a if source is None else np.asarray(source, dtype=np.float64)
    if np.any(nu <= 0):
        raise ZeroImageMass("source weight must be positive")
    if centered:
        a = a - nu[None, :]
    p, q = pair
    if p == 1:
        # extreme points of the unit ball are +-delta_y / nu(y)
        return float(np.max(lp_norm(a.T, mu, q) / nu))
    if q == math.inf:
        # dual exponent of p against the source weight
        dual = 1.0 if p == math.inf else 2.0
        return float(np.max(lp_norm(a / nu, nu, dual)))
    m = np.sqrt(mu)[:, None] * a / np.sqrt(nu)[None, :]
    return float(np.linalg.norm(m, 2))


# --- merging oracle ---------------------------------------------------------------

@dataclass
class MergingReport:
    """Per-step pairwise discrepancies of ``K_{0,n}`` and threshold crossings.

    ``max_tv[n]`` and ``max_relsup[n]`` are indexed by step ``n = 0..len-1``;
    a metric that was not requested is stored as NaN.  ``crossings`` maps
    ``"tv"``/``"relsup"`` to the first ``n`` with discrepancy strictly below
    the threshold, or ``None`` when the horizon ran out first.
    """

    max_tv: np.ndarray
    max_relsup: np.ndarray
    thresholds: dict
    crossings: dict
    horizon: int
    metric: str = "tv"
    extras: dict = field(default_factory=dict)

    @property
    def time(self):
        return self.crossings.get(self.metric)

    @property
    def reached(self):
        return self.time is not None

    @property
    def steps(self):
        return np.arange(self.max_tv.size)

    def to_csv(self):
        lines = ["n,max_tv,max_relsup"]
        for n, tv, rs in zip(self.steps, self.max_tv, self.max_relsup):
            lines.append(f"{n},{_fmt(tv)},{_fmt(rs)}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "thresholds": self.thresholds,
            "crossings": self.crossings,
            "max_tv": [_json_num(v) for v in self.max_tv],
            "max_relsup": [_json_num(v) for v in self.max_relsup],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _fmt(v):
    if np.isnan(v):
        return ""
    if np.isinf(v):
        return "inf"
    return f"{v:.17g}"


def _json_num(v):
    if np.isnan(v):
        return None
    if np.isinf(v):
        return "inf"
    return float(v)


def default_horizon(size):
    return 50 * size * size


def merging_report(schedule, eps_tv=None, eps_relsup=None, horizon=None, stop=True):
    """Run the exact oracle over ``K_{0,n}`` for ``n = 0..horizon``.

    With ``stop=True`` iteration ends as soon as every requested threshold
    has been crossed.
    """
    schedule = check_schedule(schedule)
    if horizon is None:
        horizon = min(schedule.horizon, default_horizon(schedule.size))
    if horizon > schedule.horizon:
        raise ValidationError(f"schedule only defines {schedule.horizon} steps")
    want = {"tv": eps_tv, "relsup": eps_relsup}
    want = {k: v for k, v in want.items() if v is not None}
    for v in want.values():
        if not 0 < v:
            raise ValidationError("thresholds must be positive")
    crossings = {k: None for k in want}
    tvs, rss = [], []
    for n, prod in iter_products(schedule, horizon):
        tv = tv_pairwise(prod) if "tv" in want else math.nan
        rs = relsup_pairwise(prod) if "relsup" in want else math.nan
        tvs.append(tv)
        rss.append(rs)
        for key, val in (("tv", tv), ("relsup", rs)):
            if key in want and crossings[key] is None and val < want[key]:
                crossings[key] = n
        if stop and want and all(c is not None for c in crossings.values()):
            break
    metric = "tv" if "tv" in want else "relsup"
    return MergingReport(np.array(tvs), np.array(rss), want, crossings, horizon, metric)


def merging_time_tv(schedule, eps, horizon=None):
    """Exact ``T_TV(eps)``: first ``n`` with max pairwise TV strictly below ``eps``."""
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    return merging_report(schedule, eps_tv=eps, horizon=horizon)


def merging_time_relsup(schedule, eps, horizon=None):
    """Exact ``T_inf(eps)`` for the pairwise relative-sup discrepancy."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    return merging_report(schedule, eps_relsup=eps, horizon=horizon)


def distance_profile(schedule, mu0, p, horizon=None):
    """``n -> max_x d_p(K_{0,n}(x, .), mu_n)`` for ``n = 0..horizon``."""
    schedule = check_schedule(schedule)
    mu0 = check_measure(mu0, schedule.size, positive=True)
    out = []
    for _, prod in iter_products(schedule, horizon):
        out.append(max_dp_to_target(prod, mu0 @ prod, p))
    return np.array(out)
