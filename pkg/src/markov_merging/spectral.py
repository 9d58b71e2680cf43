"""Adjoints between weighted l^2 spaces, reversibilizations, singular values and gaps."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Kernel, check_kernel, check_measure, check_schedule, check_reversible
from .eigen import symmetric_eigh, top_eigenvalues
from .exceptions import NotReversible, ValidationError, ZeroImageMass

IMAGE_FLOOR = 1e-14
SIDES = ("star_then_K", "K_then_star")


def image_measure(K, mu):
    """``mu K``, rejected if any entry falls below ``IMAGE_FLOOR``."""
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    img = w @ a
    if np.any(img < IMAGE_FLOOR):
        raise ZeroImageMass(f"image measure vanishes at state {int(np.argmin(img))}")
    return img


def _adjoint_matrix(a, mu, img):
    return a.T * mu[None, :] / img[:, None]


def adjoint_kernel(K, mu):
    """Adjoint of ``K : l^2(mu K) -> l^2(mu)``, itself a Markov kernel.

    ``K*(x, y) = K(y, x) mu(y) / (mu K)(x)``.
    """
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    img = image_measure(a, w)
    return Kernel(_adjoint_matrix(a, w, img))


def reversibilization(K, mu, side="star_then_K"):
    """Multiplicative reversibilization of ``K`` relative to ``mu``.

    ``side="star_then_K"`` gives ``P = K* K``, reversible for ``mu K``;
    ``side="K_then_star"`` gives ``K K*``, reversible for ``mu``.
    """
    if side not in SIDES:
        raise ValidationError(f"side must be one of {SIDES}")
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    img = image_measure(a, w)
    adj = _adjoint_matrix(a, w, img)
    P = adj @ a if side == "star_then_K" else a @ adj
    # restore exact symmetry of the flux lost to rounding
    ref = img if side == "star_then_K" else w
    flux = ref[:, None] * P
    flux = 0.5 * (flux + flux.T)
    P = flux / ref[:, None]
    return Kernel(P / P.sum(axis=1, keepdims=True))


def dirichlet_form(P, pi, f, g=None, check=True):
    """``E(f, g) = 1/2 sum_{x,y} (f(x) - f(y)) (g(x) - g(y)) pi(x) P(x, y)``."""
    a = np.asarray(P, dtype=np.float64)
    w = check_measure(pi, a.shape[0], positive=True)
    if check:
        ok, viol = check_reversible(a, w)
        if not ok:
            raise NotReversible(viol)
    f = np.asarray(f, dtype=np.float64)
    g = f if g is None else np.asarray(g, dtype=np.float64)
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return 0.5 * float(np.sum(df * dg * w[:, None] * a))


@dataclass
class SpectralReport:
    """Singular values of ``K : l^2(image_measure) -> l^2(base_measure)``.

    ``psi[:, i]`` are the eigenfunctions of ``K K*`` normalized in
    ``l^2(base_measure)``; ``psi[:, 0]`` is the constant function 1.
    """

    sigma: np.ndarray
    psi: np.ndarray
    base_measure: np.ndarray
    image_measure: np.ndarray

    @property
    def sigma1(self):
        return float(self.sigma[1]) if self.sigma.size > 1 else 0.0

    @property
    def gap(self):
        return 1.0 - self.sigma1

    def d2_squared(self):
        """``d_2(K(x, .), mu K)^2`` for every ``x`` via the spectral expansion."""
        return np.sum(self.psi[:, 1:] ** 2 * self.sigma[1:] ** 2, axis=1)

    def to_dict(self, include_psi=False, names=("base", "image")):
        out = {"sigma": [float(s) for s in self.sigma], "gap": self.gap,
               "measures": list(names)}
        if include_psi:
            out["psi"] = self.psi.tolist()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(**kw), indent=2)


def _weighted_matrix(a, w, img):
    return np.sqrt(w)[:, None] * a / np.sqrt(img)[None, :]


def singular_values(K, mu, method="auto"):
    """All singular values of ``K`` between ``l^2(mu K)`` and ``l^2(mu)``."""
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    img = image_measure(a, w)
    M = _weighted_matrix(a, w, img)
    lam, U = symmetric_eigh(M @ M.T, method)
    sigma = np.sqrt(np.clip(lam, 0.0, 1.0))
    psi = U / np.sqrt(w)[:, None]
    return SpectralReport(sigma, psi, w, img)


def second_singular_value(K, mu, method="auto"):
    """``sigma_1(K, mu)`` without the full decomposition.

    The top singular pair is known exactly (``sqrt(mu)``, ``sqrt(mu K)``,
    value 1), so it is deflated and the top of what remains is returned.
    """
    a = check_kernel(K)
    w = check_measure(mu, a.shape[0], positive=True)
    if a.shape[0] == 1:
        return 0.0
    img = image_measure(a, w)
    M = _weighted_matrix(a, w, img) - np.outer(np.sqrt(w), np.sqrt(img))
    lam = top_eigenvalues(M @ M.T, 1, method)[0]
    return float(np.sqrt(min(max(lam, 0.0), 1.0)))


def reversible_spectrum(P, pi, method="auto", check=True):
    """Eigenvalues (decreasing) and ``l^2(pi)``-orthonormal eigenfunctions of a reversible ``P``."""
    a = check_kernel(P)
    w = check_measure(pi, a.shape[0], positive=True)
    if check:
        ok, viol = check_reversible(a, w)
        if not ok:
            raise NotReversible(viol)
    s = np.sqrt(w)
    lam, U = symmetric_eigh(s[:, None] * a / s[None, :], method)
    return lam, U / s[:, None]


def spectral_gap(P, pi, method="auto"):
    """``1 - lambda_1`` for a reversible ``P``; ``lambda_1`` is the second largest eigenvalue.

    A one-state chain has no nonconstant functions; its gap is reported as 1.
    """
    a = check_kernel(P)
    w = check_measure(pi, a.shape[0], positive=True)
    ok, viol = check_reversible(a, w)
    if not ok:
        raise NotReversible(viol)
    if a.shape[0] == 1:
        return 1.0
    s = np.sqrt(w)
    lam = top_eigenvalues(s[:, None] * a / s[None, :], 2, method)
    return float(1.0 - lam[1])


def rayleigh_gap_estimate(P, pi, trials=200, seed=0):
    """Smallest ``E(f, f) / Var(f)`` over random ``f``; an upper bound on the gap."""
    a = np.asarray(P, dtype=np.float64)
    w = check_measure(pi, a.shape[0], positive=True)
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((trials, a.shape[0]))
    F -= (F @ w)[:, None]
    var = (F**2) @ w
    energy = var - np.einsum("ti,i,ij,tj->t", F, w, a, F)
    return float(np.min(energy / var))


def singular_sequence(schedule, mu0, n=None, method="auto"):
    """``sigma_1(K_i, mu_{i-1})`` for ``i = 1..n``."""
    schedule = check_schedule(schedule)
    n = schedule.horizon if n is None else n
    mu = check_measure(mu0, schedule.size, positive=True)
    out = np.empty(n)
    for i in range(1, n + 1):
        K = schedule.matrix(i)
        out[i - 1] = second_singular_value(K, mu, method)
        mu = mu @ K
    return out


def singular_product_bound(schedule, mu0, n, method="auto"):
    """``prod_{i=1}^n sigma_1(K_i, mu_{i-1})``, which bounds ``||K_{0,n} - mu_n||`` from ``l^2(mu_n)`` to ``l^2(mu_0)``."""
    return float(np.prod(singular_sequence(schedule, mu0, n, method)))
