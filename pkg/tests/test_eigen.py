import numpy as np
import pytest

from markov_merging.eigen import JACOBI_MAX, jacobi_eigh, symmetric_eigh, top_eigenvalues
from markov_merging.exceptions import ValidationError


def _sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


@pytest.mark.parametrize("n", [1, 2, 5, 17, 32])
def test_jacobi_matches_lapack(rng, n):
    S = _sym(rng, n)
    w, V = jacobi_eigh(S)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(S), atol=1e-12 * max(1, np.abs(S).max()))
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(S @ V, V * w, atol=1e-11)


def test_jacobi_diagonal_input_is_untouched():
    w, V = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(w, [3.0, -1.0, 2.0])
    np.testing.assert_array_equal(V, np.eye(3))


def test_output_is_sorted_with_canonical_signs(rng):
    S = _sym(rng, 6)
    for method in ("jacobi", "lapack"):
        w, V = symmetric_eigh(S, method)
        assert np.all(np.diff(w) <= 0)
        for k in range(6):
            lead = np.flatnonzero(np.abs(V[:, k]) > 1e-12)[0]
            assert V[lead, k] > 0


def test_both_methods_agree(rng):
    S = _sym(rng, 9)
    wj, Vj = symmetric_eigh(S, "jacobi")
    wl, Vl = symmetric_eigh(S, "lapack")
    np.testing.assert_allclose(wj, wl, atol=1e-12)
    np.testing.assert_allclose(np.abs(Vj.T @ Vl), np.eye(9), atol=1e-9)


def test_auto_dispatch_handles_large_input(rng):
    S = _sym(rng, JACOBI_MAX + 8)
    np.testing.assert_allclose(symmetric_eigh(S)[0], np.linalg.eigvalsh(S)[::-1], atol=1e-10)
    np.testing.assert_allclose(top_eigenvalues(S, 3), np.linalg.eigvalsh(S)[::-1][:3], atol=1e-10)


def test_rejects_non_symmetric():
    with pytest.raises(ValidationError):
        symmetric_eigh([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        symmetric_eigh(np.eye(2), method="qr")
