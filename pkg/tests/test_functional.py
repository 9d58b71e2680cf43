import math

import numpy as np
import pytest

from markov_merging import gallery
from markov_merging.exceptions import NotReversible, ZeroFunction
from markov_merging.functional import (
    NashParams,
    entropy_contraction,
    g_function,
    hypercontractivity_check,
    l2_entropy,
    log_sobolev_constant,
    log_sobolev_lower_bound,
    ls_ratio,
    mls_constant,
    mls_ratio,
    nash_certify,
    nash_ratio,
    nash_safe_constant,
    nu_of_kernel,
    phi,
    phi_gap,
    relative_entropy,
    rho_lower_bound,
)
from markov_merging.spectral import spectral_gap

from conftest import random_kernel, random_measure


# --- entropies ------------------------------------------------------------------------------

def test_l2_entropy_examples():
    assert l2_entropy([2.0, 2.0, 2.0], [0.2, 0.3, 0.5]) == pytest.approx(0, abs=1e-15)
    assert l2_entropy([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5 * math.log(2))
    with pytest.raises(ZeroFunction):
        l2_entropy([0.0, 0.0], [0.5, 0.5])


def test_relative_entropy_examples(rng):
    mu = random_measure(rng, 5)
    assert relative_entropy(mu, mu) == pytest.approx(0, abs=1e-15)
    for M in (2, 5, 9):
        assert relative_entropy(np.eye(M)[0], np.full(M, 1 / M)) == pytest.approx(math.log(M))


def test_pinsker_on_random_pairs(rng):
    for _ in range(100):
        a, b = random_measure(rng, 6), random_measure(rng, 6)
        tv = 0.5 * np.abs(a - b).sum()
        assert math.sqrt(2) * tv <= math.sqrt(relative_entropy(a, b)) + 1e-12


# --- log-Sobolev constants ---------------------------------------------------------------------

def _two_point_grid(P, pi, ratio, grid):
    return min(ratio(P, pi, np.array([1.0, t])) for t in grid)


def test_two_point_ls_matches_grid_search():
    P, pi = np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5])
    est = log_sobolev_constant(P, pi)
    grid = np.concatenate([np.linspace(1e-3, 0.999, 4000), np.linspace(1.001, 30, 4000)])
    brute = _two_point_grid(P, pi, ls_ratio, grid)
    assert est.kind == "exact-small"
    assert est.value == pytest.approx(brute, abs=1e-4)
    assert est.value <= brute + 1e-12


def test_two_point_asymmetric_ls_closed_form_below_ratios():
    a, b = 0.3, 0.1
    P = np.array([[1 - a, a], [b, 1 - b]])
    pi = np.array([b, a]) / (a + b)
    est = log_sobolev_constant(P, pi)
    grid = np.concatenate([np.linspace(1e-3, 0.999, 3000), np.linspace(1.001, 50, 3000)])
    brute = _two_point_grid(P, pi, ls_ratio, grid)
    assert est.value <= brute + 1e-12
    assert est.value == pytest.approx(brute, rel=1e-3)


def test_two_point_mls_not_below_ls():
    P, pi = np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5])
    grid = np.concatenate([np.linspace(1e-3, 0.999, 2000), np.linspace(1.001, 30, 2000)])
    assert _two_point_grid(P, pi, mls_ratio, grid) >= _two_point_grid(P, pi, ls_ratio, grid)
    assert mls_constant(P, pi).value >= log_sobolev_constant(P, pi).value - 1e-9


@pytest.mark.parametrize("two_N", [2, 4])
def test_lazy_hypercube_ls(two_N):
    inst = gallery.hypercube(two_N, 0.0)
    est = log_sobolev_constant(inst.kernel, inst.measures["uniform"], starts=16)
    assert est.value == pytest.approx(inst.constants["ls_lazy_srw"].value, abs=1e-6)


def test_hypercube_walk_ls():
    K0 = gallery.hypercube_kernel(4, 0.0, lazy=False)
    est = log_sobolev_constant(K0, np.full(16, 1 / 16), starts=16)
    assert 2 * est.value == pytest.approx(1 / 2, abs=1e-6)


def test_ls_limit_flag_carries_gap_direction():
    inst = gallery.metropolis_bd(0.0, 2)
    pi = inst.measures["target"]
    est = log_sobolev_constant(inst.kernel, pi, starts=16)
    gap = spectral_gap(inst.kernel, pi)
    assert est.value <= gap / 2 + 1e-12
    if est.limit:
        assert est.value == pytest.approx(gap / 2)
        assert abs(est.witness @ pi.weights) < 1e-10


def test_ls_estimate_sits_between_lower_bound_and_found_ratios(rng):
    inst = gallery.metropolis_bd(1.0, 3)
    P, pi = inst.kernel, inst.measures["target"]
    est = log_sobolev_constant(P, pi, starts=32)
    assert log_sobolev_lower_bound(P, pi).value <= est.value + 1e-12
    for _ in range(200):
        f = np.exp(rng.standard_normal(P.size))
        assert ls_ratio(P, pi, f) >= est.value - 1e-9


def test_mls_transpose_chain_above_comparison_bound():
    inst = gallery.transpose_i_random(4, 2)
    est = mls_constant(inst.kernel, inst.measures["uniform"], starts=8)
    assert est.value >= inst.constants["mls_lower"].value - 1e-9


def test_ls_rejects_non_reversible():
    sticky = gallery.sticky_permutation(4, 1, 0.1)
    with pytest.raises(NotReversible):
        log_sobolev_constant(sticky.kernel, sticky.measures["uniform"])


# --- entropy contraction -------------------------------------------------------------------------

def test_entropy_contraction_examples(rng):
    nu = random_measure(rng, 4)
    assert entropy_contraction(np.tile(random_measure(rng, 4), (4, 1)), nu) == pytest.approx(1.0)
    assert entropy_contraction(np.eye(4), nu) == pytest.approx(0.0, abs=1e-12)
    assert entropy_contraction(np.full((2, 2), 0.5), [0.5, 0.5]) == pytest.approx(1.0, abs=1e-9)


# --- scalar helpers -------------------------------------------------------------------------------

def test_g_function_values():
    for nu in (0.0, 1e-6, 0.3, 7.0):
        assert g_function(2, nu) == 1.0
    # (6 nu^2 + ...) / (2 nu + nu^2)^2 -> 3/2
    assert g_function(4, 0.0) == pytest.approx(1.5, abs=1e-12)
    assert g_function(4, 1e-4) == pytest.approx((6 + 4e-4 + 1e-8) / (2 + 1e-4) ** 2, rel=1e-12)
    assert g_function(4, 0.1) == pytest.approx(g_function(4, 0.1 + 1e-12), rel=1e-9)


def test_g_function_at_least_one_on_grid():
    vals = [g_function(q, nu) for q in np.linspace(2, 20, 37) for nu in np.linspace(0, 100, 201)]
    assert min(vals) >= 1 - 1e-12


def test_nu_of_kernel():
    assert nu_of_kernel([[0, 1], [1, 0]]) == 0
    assert nu_of_kernel([[0.5, 0.5], [0.5, 0.5]]) == pytest.approx(1.0)
    for n in (3, 4):
        assert nu_of_kernel(gallery.transpose_i_kernel(n, 1, lazy=False).matrix) == pytest.approx(n - 1)


def test_phi_and_gap_values():
    assert phi(-1.0) == pytest.approx(1.0)
    assert phi_gap(0.0) == 0
    assert phi_gap(-1.0) == pytest.approx(0.0, abs=1e-15)
    x = np.linspace(-1, 100, 100_000)
    assert np.max(phi_gap(x)) <= 1e-12


def test_rho_value():
    rho = rho_lower_bound()
    assert rho == pytest.approx(0.106348, abs=1e-6)
    assert 0.1 < rho < 1


# --- Nash certification -----------------------------------------------------------------------------

def test_nash_circle_passes_with_polynomial_constant():
    p = 21
    N = gallery.circle_half_size(p)
    inst = gallery.circle(p, 0.0)
    u = inst.measures["uniform"]
    cert = nash_certify(inst.kernel, u, NashParams(p**2, 0.25, N**2))
    assert cert.passed and cert.witness is None


def test_nash_circle_point_mass_ratio():
    # for a point mass: ||f||_2^2 = ||f||_1 = E(f, f) = 1/p, so the ratio is p^2 / (1 + 1/N)
    p = 21
    N = gallery.circle_half_size(p)
    inst = gallery.circle(p, 0.0)
    u = inst.measures["uniform"]
    spike = np.eye(p)[0]
    expect = p**2 / (1 + 1 / N**2)
    assert nash_ratio(inst.kernel.matrix, u.weights, spike, NashParams(1, 0.25, N**2)) == pytest.approx(expect)
    # 4N^2 < p^2 / (1 + 1/N^2) on odd circles, so the spike refutes it
    cert = nash_certify(inst.kernel, u, NashParams(4 * N**2, 0.25, N**2))
    assert not cert.passed and cert.value == pytest.approx(expect)


def test_nash_complete_kernel_with_huge_constant():
    cert = nash_certify(np.full((6, 6), 1 / 6), np.full(6, 1 / 6), NashParams(1e6, 1.0, 10))
    assert cert.passed


def test_nash_fails_below_observed_constant():
    inst = gallery.circle(11, 0.0)
    u = inst.measures["uniform"]
    probe = nash_certify(inst.kernel, u, NashParams(1e9, 0.25, 5))
    cert = nash_certify(inst.kernel, u, NashParams(probe.value / 2, 0.25, 5))
    assert not cert.passed
    assert nash_ratio(inst.kernel.matrix, u.weights, cert.witness, NashParams(1, 0.25, 5)) > probe.value / 2


def test_nash_safe_constant_is_never_beaten():
    inst = gallery.metropolis_bd(1.0, 3)
    pi = inst.measures["target"]
    C = nash_safe_constant(pi, 0.5, 4)
    assert nash_certify(inst.kernel, pi, NashParams(C, 0.5, 4), trials=500).passed


# --- hypercontractivity -------------------------------------------------------------------------------

def test_hypercontractivity_trivial_exponent(rng):
    K = random_kernel(rng, 5)
    assert hypercontractivity_check(K, random_measure(rng, 5), 2.0, 0.0).passed


def test_hypercontractivity_rank_one(rng):
    R = np.tile(random_measure(rng, 4), (4, 1))
    assert hypercontractivity_check(R, random_measure(rng, 4), 2.0, 0.0, q=50.0).passed


def test_hypercontractivity_lazy_hypercube():
    inst = gallery.hypercube(6, 0.0)
    cert = hypercontractivity_check(inst.kernel, inst.measures["uniform"], 2.0, 1 / 12, trials=500)
    assert cert.passed and cert.details["q"] == pytest.approx(2 * (1 + 1 / 12))
