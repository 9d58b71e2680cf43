"""Dense symmetric eigensolver.

Small matrices go through a cyclic Jacobi sweep, which is deterministic and
accurate to working precision.  Beyond ``JACOBI_MAX`` states the O(n^3) cost
per sweep in Python-level loops is prohibitive, so ``method="auto"`` hands
over to LAPACK.  Either way the output is sorted in decreasing order with a
fixed eigenvector sign.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .exceptions import ValidationError

JACOBI_MAX = 32
SYMMETRY_TOL = 1e-10


def _round_robin(n):
    """Pairings of ``0..n-1`` into rounds of disjoint pairs covering every pair once."""
    m = n + n % 2
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(min(a, b), max(a, b)) for a, b in
                 ((players[k], players[m - 1 - k]) for k in range(m // 2)) if max(a, b) < n]
        if pairs:
            rounds.append(tuple(np.array(v) for v in zip(*pairs)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by Jacobi rotations.

    Rotations are applied in round-robin order: each round annihilates a
    set of disjoint off-diagonal pairs at once, so one sweep is ``n - 1``
    matrix products.

    Returns
    -------
    w : ndarray
        Eigenvalues, unsorted.
    V : ndarray
        Orthonormal eigenvectors as columns.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    if n < 2:
        return np.diag(A).copy(), V
    scale = max(np.abs(A).max(), 1e-300)
    rounds = _round_robin(n)
    polish = False
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= 1e-300 or polish:
            break
        # convergence is quadratic, so one sweep past tol reaches roundoff
        polish = off <= tol * scale
        for P, Q in rounds:
            apq = A[P, Q]
            live = np.abs(apq) > 1e-18 * scale
            if not live.any():
                continue
            P, Q, apq = P[live], Q[live], apq[live]
            theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            t = np.where(theta == 0, 1.0, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            J = np.eye(n)
            J[P, P] = c
            J[Q, Q] = c
            J[P, Q] = s
            J[Q, P] = -s
            A = J.T @ A @ J
            A[P, Q] = A[Q, P] = 0.0
            V = V @ J
    return np.diag(A).copy(), V


def _canonical(w, V):
    """Sort decreasing and make each vector's first nonzero entry positive."""
    n = V.shape[0]
    lead = np.empty(w.size, dtype=np.int64)
    for k in range(w.size):
        nz = np.flatnonzero(np.abs(V[:, k]) > 1e-12)
        j = nz[0] if nz.size else 0
        lead[k] = j
        if V[j, k] < 0:
            V[:, k] = -V[:, k]
    order = np.lexsort((lead, -np.round(w, 12)))
    return w[order], V[:, order]


def symmetric_eigh(S, method="auto", tol=1e-12):
    """Eigenvalues (decreasing) and eigenvectors of a symmetric matrix.

    Parameters
    ----------
    method : {"auto", "jacobi", "lapack"}
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError("expected a square matrix")
    asym = np.abs(S - S.T).max() if S.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.abs(S).max()):
        raise ValidationError(f"matrix is not symmetric (max asymmetry {asym:.2e})")
    S = 0.5 * (S + S.T)
    if method == "auto":
        method = "jacobi" if S.shape[0] <= JACOBI_MAX else "lapack"
    if method == "jacobi":
        w, V = jacobi_eigh(S, tol)
    elif method == "lapack":
        w, V = scipy.linalg.eigh(S)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return _canonical(w, V)


def top_eigenvalues(S, k=2, method="auto"):
    """The ``k`` largest eigenvalues in decreasing order."""
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    k = min(k, n)
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX else "lapack"
    if method == "lapack":
        w = scipy.linalg.eigh(0.5 * (S + S.T), eigvals_only=True, subset_by_index=[n - k, n - 1])
        return w[::-1]
    return symmetric_eigh(S, method)[0][:k]
