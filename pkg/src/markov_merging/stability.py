"""c-stability: observation along schedules, search over kernel sets, explicit
stable measure classes and their closure checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Schedule, check_kernel, check_measure, check_schedule, evolve, stack_kernels
from .exceptions import (
    DepthTooLarge,
    NotMember,
    NotSymmetricBD,
    PerturbationTooLarge,
    ValidationError,
)
from .functional import Certificate
from .gallery import check_symmetric_bd, circle_kernel, hypercube_kernel, popcounts

MODES = ("single-schedule", "exhaustive", "envelope", "sampled")
MEMBER_TOL = 1e-12


@dataclass
class StabilityCertificate:
    """Largest observed ``max_x max(mu_n/mu_0, mu_0/mu_n)``.

    In ``exhaustive`` and ``single-schedule`` modes the value is exact over
    what was checked; in ``envelope`` mode it is an upper bound valid for
    every schedule up to ``horizon``; in ``sampled`` mode it is a lower
    bound on the worst case.
    """

    mu0: np.ndarray
    observed_c: float
    horizon: int
    schedules_checked: object
    mode: str
    witness: list | None = None
    worst_step: int | None = None
    history: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "kind": "c-stability",
            "mode": self.mode,
            "value": self.observed_c if math.isfinite(self.observed_c) else "inf",
            "horizon": self.horizon,
            "schedules_checked": self.schedules_checked,
            "witness": self.witness,
            "worst_step": self.worst_step,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _ratio(mus, mu0):
    with np.errstate(divide="ignore"):
        up = mus / mu0
        down = mu0 / mus
    return np.maximum(up, down).max(axis=-1)


def check_c_stability(schedule, mu0, horizon=None):
    """Exact stability constant of one schedule over steps ``0..horizon``."""
    schedule = check_schedule(schedule)
    mu0 = check_measure(mu0, schedule.size, positive=True)
    mus = evolve(mu0, schedule, horizon)
    per_step = _ratio(mus, mu0)
    worst = int(np.argmax(per_step))
    return StabilityCertificate(mu0, float(per_step[worst]), mus.shape[0] - 1, 1,
                                "single-schedule", [int(j) for j in schedule.indices[:worst]],
                                worst, per_step)


def _box_image(lo, hi, a):
    """Coordinatewise range of ``mu a`` over ``mu`` in the box ``[lo, hi]`` intersected with the simplex.

    Each coordinate is a fractional knapsack: start from ``lo`` and pour
    the remaining mass into the cheapest (or dearest) states first.
    """
    r = max(1.0 - lo.sum(), 0.0)
    cap = hi - lo
    base = lo @ a
    out = []
    for order in (np.argsort(a, axis=0, kind="stable"), np.argsort(-a, axis=0, kind="stable")):
        c_sorted = np.take_along_axis(a, order, axis=0)
        cap_sorted = cap[order]
        before = np.cumsum(cap_sorted, axis=0) - cap_sorted
        fill = np.clip(r - before, 0.0, cap_sorted)
        out.append(base + np.sum(fill * c_sorted, axis=0))
    return out[0], out[1]


def search_c_stability(kernels, mu0, horizon, mode="exhaustive", samples=100, seed=0,
                       depth_cap=10, max_set=4):
    """Stability of a kernel set over all (or many) schedules of length ``horizon``.

    ``exhaustive`` enumerates every sequence level by level; ``envelope``
    propagates a per-state box that contains every reachable ``mu_n`` and
    so certifies an upper bound; ``sampled`` runs seeded random schedules.
    """
    if mode not in MODES[1:]:
        raise ValidationError(f"mode must be one of {MODES[1:]}")
    ks = stack_kernels(kernels)
    mats = np.stack([k.matrix for k in ks])
    mu0 = check_measure(mu0, mats.shape[1], positive=True)
    if mode == "exhaustive":
        if horizon > depth_cap or len(ks) > max_set:
            raise DepthTooLarge(f"exhaustive search limited to depth {depth_cap} and {max_set} kernels")
        level = mu0[None, :]
        best, witness, step = 1.0, [], 0
        for t in range(1, horizon + 1):
            level = np.einsum("bi,kij->bkj", level, mats).reshape(-1, mu0.size)
            r = _ratio(level, mu0)
            j = int(np.argmax(r))
            if r[j] > best:
                best, step = float(r[j]), t
                witness = [int(d) for d in np.base_repr(j, len(ks)).zfill(t)] if len(ks) > 1 else [0] * t
        return StabilityCertificate(mu0, best, horizon, f"exhaustive-to-depth-{horizon}",
                                    mode, witness, step)
    if mode == "envelope":
        lo, hi = mu0.copy(), mu0.copy()
        best, step = 1.0, 0
        for t in range(1, horizon + 1):
            images = [_box_image(lo, hi, a) for a in mats]
            lo = np.min([im[0] for im in images], axis=0)
            hi = np.max([im[1] for im in images], axis=0)
            lo = np.maximum(lo, 0.0)
            with np.errstate(divide="ignore"):
                r = float(max((hi / mu0).max(), (mu0 / lo).max()))
            if r > best:
                best, step = r, t
        return StabilityCertificate(mu0, best, horizon, "all (outer bound)", mode, None, step)
    rng = np.random.default_rng(seed)
    best, witness, step = 1.0, None, 0
    for k in range(samples):
        sched = Schedule.random(ks, horizon, int(rng.integers(2**63)))
        cert = check_c_stability(sched, mu0)
        if cert.observed_c > best or witness is None:
            best, step = cert.observed_c, cert.worst_step
            witness = [int(j) for j in sched.indices[:step]]
    return StabilityCertificate(mu0, best, horizon, samples, mode, witness, step)


# --- S_N(eps) on the circle -------------------------------------------------------------

@dataclass
class SNClassCoefficients:
    epsilon: float
    p: int
    a: np.ndarray


def _mirror(p):
    return (-np.arange(p)) % p


def sn_class(mu, epsilon, tol=MEMBER_TOL):
    """Offsets ``a_x = mu(x) - 1/p`` of a measure in ``S_N(eps)``.

    Raises
    ------
    NotMember
        With ``condition`` 1 (antisymmetry ``a_x = -a_{-x}``) or 2
        (``|a_x| <= 2 eps / p``).
    """
    w = check_measure(mu)
    p = w.size
    a = w - 1.0 / p
    anti = np.abs(a + a[_mirror(p)])
    if anti.max() > tol:
        x = int(np.argmax(anti))
        raise NotMember(1, f"a[{x}] + a[-{x}] = {anti[x]:.3e}")
    over = np.abs(a) - 2.0 * epsilon / p
    if over.max() > tol:
        x = int(np.argmax(over))
        raise NotMember(2, f"|a[{x}]| exceeds 2 eps/p by {over[x]:.3e}")
    return SNClassCoefficients(epsilon, p, a)


def random_sn_measure(p, epsilon, rng):
    """A random member of ``S_N(eps)``; some coordinates sit on the boundary."""
    a = np.zeros(p)
    half = (p - 1) // 2
    vals = rng.uniform(-1.0, 1.0, size=half)
    vals[rng.random(half) < 0.3] = rng.choice([-1.0, 1.0])
    a[1:half + 1] = vals * 2.0 * epsilon / p
    a[_mirror(p)[1:half + 1]] = -a[1:half + 1]
    return 1.0 / p + a


def sn_closure_check(epsilon, trials=1000, sizes=(10, 11, 20, 21), seed=0, site=0, lazy=False):
    """Randomized test that ``mu in S_N(eps)``, ``K in Q(eps)`` imply ``mu K in S_N(eps)``.

    ``site != 0`` moves the perturbation off the middle vertex, which breaks
    closure and serves as a negative control.
    """
    rng = np.random.default_rng(seed)
    for t in range(trials):
        p = int(rng.choice(sizes))
        mu = random_sn_measure(p, epsilon, rng)
        delta = float(rng.choice([-epsilon, epsilon])) if t % 5 == 0 else float(rng.uniform(-epsilon, epsilon))
        K = circle_kernel(p, delta, lazy=lazy, site=site)
        try:
            sn_class(mu @ K.matrix, epsilon)
        except NotMember as exc:
            return Certificate("sn-closure", t + 1, False, trials, seed, mu,
                               {"p": p, "delta": delta, "condition": exc.condition, "site": site})
    return Certificate("sn-closure", trials, True, trials, seed, None, {"site": site})


# --- S_2N on the hypercube -------------------------------------------------------------

def s2n_class(mu, epsilon, N, tol=MEMBER_TOL):
    """Check the three conditions of ``S_2N``; returns per-level offsets ``a_i``, ``i = -N..N``."""
    size = 1 << (2 * N)
    w = check_measure(mu, size)
    lev = popcounts(size)
    base = 4.0**-N
    mid = np.abs(w[lev == N] - base)
    if mid.max() > tol * base:
        raise NotMember(1, f"middle level deviates by {mid.max():.3e}")
    a = np.zeros(2 * N + 1)
    for i in range(-N, N + 1):
        vals = w[lev == N + i] - base
        if vals.max() - vals.min() > tol * base:
            raise NotMember(2, f"level {N + i} is not constant")
        a[i + N] = vals.mean()
    if np.abs(a + a[::-1]).max() > tol * base:
        raise NotMember(2, "level offsets are not antisymmetric")
    if np.abs(a).max() > epsilon * base * (1 + tol) + tol * base:
        raise NotMember(3, f"|a| = {np.abs(a).max() / base:.4g} / 4^N exceeds eps / 4^N")
    return a


def random_s2n_measure(epsilon, N, rng):
    size = 1 << (2 * N)
    lev = popcounts(size)
    a = np.zeros(2 * N + 1)
    vals = rng.uniform(-1.0, 1.0, size=N) * epsilon * 4.0**-N
    vals[rng.random(N) < 0.3] = rng.choice([-1.0, 1.0]) * epsilon * 4.0**-N
    a[N + 1:] = vals
    a[:N] = -vals[::-1]
    return 4.0**-N + a[lev]


def s2n_closure_check(epsilon, N, trials=500, seed=0, corrupt=False, lazy=False):
    """Randomized closure of ``S_2N`` under ``Q(eps)``; also tracks the stability ratio.

    ``corrupt=True`` applies the bias at level ``N - 1`` instead of ``N``.
    """
    if 2 * N > 12:
        raise ValidationError("dimension above 12 is not supported")
    rng = np.random.default_rng(seed)
    size = 1 << (2 * N)
    c_bound = (1 + epsilon) / (1 - epsilon)
    worst = 1.0
    for t in range(trials):
        mu = random_s2n_measure(epsilon, N, rng)
        delta = float(rng.uniform(-epsilon, epsilon))
        K = _corrupted_hypercube(2 * N, delta, lazy) if corrupt else hypercube_kernel(2 * N, delta, lazy).matrix
        img = mu @ K
        try:
            s2n_class(img, epsilon, N)
        except NotMember as exc:
            return Certificate("s2n-closure", worst, False, trials, seed, mu,
                               {"delta": delta, "condition": exc.condition})
        u = np.full(size, 1.0 / size)
        worst = max(worst, float(_ratio(img[None, :], u)[0]))
    passed = worst <= c_bound + 1e-12
    return Certificate("s2n-closure", worst, passed, trials, seed, None, {"c_bound": c_bound})


def _corrupted_hypercube(two_N, delta, lazy):
    N = two_N // 2
    size = 1 << two_N
    lev = popcounts(size)
    a = np.zeros((size, size))
    x = np.arange(size)
    for k in range(two_N):
        y = x ^ (1 << k)
        w = np.full(size, 1.0 / two_N)
        mid = lev == N - 1
        up = (x >> k) & 1 == 0
        w[mid & up] = (1 + delta) / two_N
        w[mid & ~up] = 1.0 / two_N
        a[x, y] = w
    a /= a.sum(axis=1, keepdims=True)
    return 0.5 * (np.eye(size) + a) if lazy else a


# --- perturbed birth and death ----------------------------------------------------------

def bd_perturbation_stability(Q, nu, s):
    """Move ``s`` of the middle vertex's mass from ``-1`` to ``+1``.

    Returns the perturbed kernel, its reversible measure
    ``nu_s(+-x) = nu(+-x)(1 +- s/q0)`` (``nu_s(0) = nu(0)``) and the
    stability constant ``(q0 + |s|)/(q0 - |s|)``.
    """
    a = check_kernel(Q)
    w = check_measure(nu, a.shape[0], positive=True)
    if not check_symmetric_bd(a):
        raise NotSymmetricBD("kernel is not a birth-and-death chain symmetric about the middle")
    N = a.shape[0] // 2
    q0 = a[N, N + 1]
    if abs(s) >= q0:
        raise PerturbationTooLarge(f"|s| must be < q0 = {q0}")
    b = a.copy()
    b[N, N + 1] += s
    b[N, N - 1] -= s
    x = np.arange(-N, N + 1)
    nu_s = w * (1.0 + np.sign(x) * s / q0)
    return b, nu_s, (q0 + abs(s)) / (q0 - abs(s))
