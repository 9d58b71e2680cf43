import math

import numpy as np
import pytest

from markov_merging import gallery
from markov_merging.core import Schedule, check_reversible, compose, evolve
from markov_merging.distances import operator_norm
from markov_merging.exceptions import NotReversible, ZeroImageMass
from markov_merging.spectral import (
    adjoint_kernel,
    dirichlet_form,
    image_measure,
    rayleigh_gap_estimate,
    reversibilization,
    second_singular_value,
    singular_product_bound,
    singular_sequence,
    singular_values,
    spectral_gap,
)

from conftest import random_kernel, random_measure


def _svd_oracle(K, mu):
    img = mu @ K
    M = np.sqrt(mu)[:, None] * K / np.sqrt(img)[None, :]
    return np.linalg.svd(M, compute_uv=False)


# --- adjoints and reversibilizations --------------------------------------------------------

def test_adjoint_of_reversible_pair_is_itself():
    inst = gallery.metropolis_bd(1.0, 5)
    pi = inst.measures["target"]
    np.testing.assert_allclose(adjoint_kernel(inst.kernel, pi).matrix, inst.kernel.matrix, atol=1e-14)


def test_adjoint_of_flip():
    Kst = adjoint_kernel([[0, 1], [1, 0]], [0.3, 0.7])
    np.testing.assert_allclose(Kst.matrix, [[0, 1], [1, 0]])
    np.testing.assert_allclose(image_measure([[0, 1], [1, 0]], [0.3, 0.7]), [0.7, 0.3])


def test_adjoint_is_markov_and_satisfies_inner_product_identity(rng):
    K = random_kernel(rng, 4)
    mu = random_measure(rng, 4)
    Kst = adjoint_kernel(K, mu).matrix
    np.testing.assert_allclose(Kst.sum(axis=1), 1.0, atol=1e-12)
    f, g = rng.standard_normal(4), rng.standard_normal(4)
    # <Kf, g>_mu = <f, K* g>_{mu K}
    assert (K @ f * g) @ mu == pytest.approx((f * (Kst @ g)) @ (mu @ K), abs=1e-13)


def test_adjoint_rejects_vanishing_image():
    with pytest.raises(ZeroImageMass):
        adjoint_kernel([[1, 0], [1, 0]], [0.5, 0.5])


def test_reversibilization_of_symmetric_kernel_is_square():
    Q = gallery.circle_kernel(7, 0.0).matrix
    np.testing.assert_allclose(reversibilization(Q, np.full(7, 1 / 7)).matrix, Q @ Q, atol=1e-15)


def test_lazy_circle_reversibilization_offsets():
    p = 9
    P = reversibilization(gallery.circle_kernel(p, 0.0, lazy=True), np.full(p, 1 / p)).matrix
    for x in range(p):
        assert P[x, x] == pytest.approx(3 / 8)
        assert P[x, (x + 1) % p] == pytest.approx(1 / 4) and P[x, (x - 1) % p] == pytest.approx(1 / 4)
        assert P[x, (x + 2) % p] == pytest.approx(1 / 16) and P[x, (x - 2) % p] == pytest.approx(1 / 16)


def test_reversibilization_matches_summation_formula(rng):
    K = random_kernel(rng, 4)
    mu = random_measure(rng, 4)
    img = mu @ K
    expect = np.zeros((4, 4))
    for x in range(4):
        for y in range(4):
            expect[x, y] = sum(mu[z] * K[z, x] * K[z, y] for z in range(4)) / img[x]
    P = reversibilization(K, mu).matrix
    np.testing.assert_allclose(P, expect, atol=1e-14)
    assert check_reversible(P, img)[0]
    Pc = reversibilization(K, mu, "K_then_star").matrix
    assert check_reversible(Pc, mu)[0]


# --- Dirichlet form -------------------------------------------------------------------------------

def test_dirichlet_form_examples(rng):
    P, u = [[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]
    assert dirichlet_form(P, u, [3.0, 3.0]) == 0
    assert dirichlet_form(P, u, [0.0, 1.0]) == pytest.approx(0.25)


def test_dirichlet_form_equals_inner_product_form(rng):
    inst = gallery.metropolis_bd(1.5, 4)
    P, pi = inst.kernel.matrix, inst.measures["target"].weights
    f = rng.standard_normal(P.shape[0])
    # <(I - P) f, f>_pi
    assert dirichlet_form(P, pi, f) == pytest.approx(((f - P @ f) * f) @ pi, abs=1e-13)


def test_dirichlet_form_rejects_non_reversible():
    sticky = gallery.sticky_permutation(4, 1, 0.1)
    with pytest.raises(NotReversible):
        dirichlet_form(sticky.kernel, sticky.measures["uniform"], np.arange(24.0))


# --- singular values ----------------------------------------------------------------------------

def test_singular_values_match_svd(rng):
    for n in (3, 6, 40):
        K = random_kernel(rng, n, sparsity=0.2)
        mu = random_measure(rng, n)
        rep = singular_values(K, mu)
        np.testing.assert_allclose(rep.sigma, _svd_oracle(K, mu), atol=1e-10)
        assert second_singular_value(K, mu) == pytest.approx(rep.sigma1, abs=1e-10)
        np.testing.assert_allclose(rep.psi[:, 0], 1.0, atol=1e-10)


def test_d2_expansion_matches_direct(rng):
    K = random_kernel(rng, 5)
    mu = random_measure(rng, 5)
    img = mu @ K
    direct = ((K / img - 1) ** 2) @ img
    np.testing.assert_allclose(singular_values(K, mu).d2_squared(), direct, atol=1e-12)


def test_rank_one_kernel_has_zero_sigma(rng):
    nu = random_measure(rng, 4)
    assert second_singular_value(np.tile(nu, (4, 1)), random_measure(rng, 4)) == pytest.approx(0, abs=1e-7)


def test_circle_five_sigma():
    Q = gallery.circle_kernel(5, 0.0)
    assert second_singular_value(Q, np.full(5, 0.2)) == pytest.approx(abs(math.cos(4 * math.pi / 5)), abs=1e-12)


@pytest.mark.parametrize("two_N", [4, 6, 8])
def test_lazy_hypercube_sigma(two_N):
    inst = gallery.hypercube(two_N, 0.0)
    assert second_singular_value(inst.kernel, inst.measures["uniform"]) == pytest.approx(
        inst.constants["sigma1_lazy_srw"].value, abs=1e-9)


# --- spectral gaps ------------------------------------------------------------------------------

def test_complete_kernel_gap_is_one():
    assert spectral_gap(np.full((5, 5), 0.2), np.full(5, 0.2)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("two_N", [4, 6])
def test_hypercube_walk_gap(two_N):
    K0 = gallery.hypercube_kernel(two_N, 0.0, lazy=False)
    size = 1 << two_N
    assert spectral_gap(K0, np.full(size, 1 / size)) == pytest.approx(2 / two_N, abs=1e-10)


def test_birth_death_gap_matches_dense_eigensolver():
    inst = gallery.metropolis_bd(1.0, 1)
    P, pi = inst.kernel.matrix, inst.measures["target"].weights
    s = np.sqrt(pi)
    lam = np.sort(np.linalg.eigvalsh(s[:, None] * P / s[None, :]))[::-1]
    assert spectral_gap(P, pi) == pytest.approx(1 - lam[1], abs=1e-12)
    assert rayleigh_gap_estimate(P, pi) >= spectral_gap(P, pi) - 1e-12


# --- products along a schedule ----------------------------------------------------------------------

def test_rank_one_schedule_product_vanishes(rng):
    R = np.tile(random_measure(rng, 3), (3, 1))
    assert singular_product_bound(Schedule.constant(R, 3), random_measure(rng, 3), 1) == pytest.approx(0, abs=1e-7)


def test_stationary_product_is_power():
    inst = gallery.metropolis_bd(1.0, 4)
    pi = inst.measures["target"]
    s = second_singular_value(inst.kernel, pi)
    assert singular_product_bound(Schedule.constant(inst.kernel, 6), pi, 6) == pytest.approx(s**6, rel=1e-10)


def test_product_bounds_exact_centred_norm():
    ks = [gallery.circle_kernel(11, d) for d in (0.1, -0.1)]
    sched = Schedule.cycle(ks, 20)
    u = np.full(11, 1 / 11)
    mus = evolve(u, sched)
    sig = singular_sequence(sched, u)
    for n in (1, 5, 20):
        K0n = compose(sched, 0, n).matrix
        exact = operator_norm(K0n, u, 2, 2, source=mus[n], centered=True)
        assert np.prod(sig[:n]) >= exact - 1e-9
