import itertools

import numpy as np
import pytest

from markov_merging import gallery
from markov_merging.core import Schedule, check_reversible, evolve
from markov_merging.exceptions import (
    DepthTooLarge,
    NotMember,
    NotSymmetricBD,
    PerturbationTooLarge,
    ValidationError,
)
from markov_merging.stability import (
    bd_perturbation_stability,
    check_c_stability,
    random_s2n_measure,
    random_sn_measure,
    s2n_class,
    s2n_closure_check,
    search_c_stability,
    sn_class,
    sn_closure_check,
)

from conftest import random_kernel


def _brute_c(ks, mu0, horizon):
    best = 1.0
    for seq in itertools.product(range(len(ks)), repeat=horizon):
        mu = np.asarray(mu0, dtype=float)
        for j in seq:
            mu = mu @ ks[j]
            best = max(best, np.max(np.maximum(mu / mu0, mu0 / mu)))
    return best


# --- single schedules ------------------------------------------------------------------

def test_shared_invariant_measure_gives_one():
    ks = [gallery.circle_kernel(9, 0.0), gallery.circle_kernel(9, 0.0, lazy=True)]
    cert = check_c_stability(Schedule.random(ks, 50, 0), np.full(9, 1 / 9))
    assert cert.observed_c == pytest.approx(1.0)


def test_circle_schedule_within_closure_constant():
    eps = 0.2
    ks, _ = gallery.circle_family(11, eps, grid=5)
    cert = check_c_stability(Schedule.random(ks, 300, 4), np.full(11, 1 / 11))
    assert 1.0 < cert.observed_c <= (1 + 2 * eps) / (1 - 2 * eps) + 1e-12


def test_opposing_drifts_are_unstable_in_size():
    cs = []
    for N in (5, 10, 20):
        ks = [gallery.biased_walk(N, 0.5, 1), gallery.biased_walk(N, 0.5, -1)]
        cs.append(check_c_stability(Schedule.constant(ks[0], 20 * N), np.full(N + 1, 1 / (N + 1))).observed_c)
    assert cs[0] < cs[1] < cs[2]


def test_single_schedule_value_matches_history():
    ks = [gallery.circle_kernel(7, 0.3), gallery.circle_kernel(7, -0.3)]
    sched = Schedule.random(ks, 30, 2)
    u = np.full(7, 1 / 7)
    cert = check_c_stability(sched, u)
    mus = evolve(u, sched)
    assert cert.observed_c == pytest.approx(np.max(np.maximum(mus / u, u / mus)))
    assert len(cert.witness) == cert.worst_step


# --- search over schedules --------------------------------------------------------------

def test_singleton_invariant_set_search_is_trivial():
    u = np.full(9, 1 / 9)
    for mode in ("exhaustive", "envelope", "sampled"):
        cert = search_c_stability([gallery.circle_kernel(9, 0.0)], u, 6, mode=mode, samples=5)
        assert cert.observed_c == pytest.approx(1.0)


def test_exhaustive_matches_brute_force(rng):
    ks = [random_kernel(rng, 4), random_kernel(rng, 4), random_kernel(rng, 4)]
    mu0 = np.full(4, 0.25)
    cert = search_c_stability(ks, mu0, 4, mode="exhaustive")
    assert cert.observed_c == pytest.approx(_brute_c(ks, mu0, 4))
    # replay the witness
    replay = check_c_stability(Schedule.from_indices(ks, cert.witness), mu0)
    assert replay.observed_c == pytest.approx(cert.observed_c)


def test_circle_two_kernels_depth_eight():
    eps = 0.1
    ks = [gallery.circle_kernel(11, eps), gallery.circle_kernel(11, -eps)]
    u = np.full(11, 1 / 11)
    ex = search_c_stability(ks, u, 8, mode="exhaustive")
    assert ex.observed_c <= 1.5 + 1e-12
    env = search_c_stability(ks, u, 8, mode="envelope")
    smp = search_c_stability(ks, u, 8, mode="sampled", samples=50)
    assert smp.observed_c <= ex.observed_c + 1e-12 <= env.observed_c + 2e-12


def test_search_limits():
    ks = [np.eye(2)] * 2
    with pytest.raises(DepthTooLarge):
        search_c_stability(ks, [0.5, 0.5], 11)
    with pytest.raises(DepthTooLarge):
        search_c_stability([np.eye(2)] * 5, [0.5, 0.5], 3)
    with pytest.raises(ValidationError):
        search_c_stability(ks, [0.5, 0.5], 3, mode="single-schedule")


# --- S_N(eps) on the circle -------------------------------------------------------------

def test_sn_class_members_and_violations():
    p, eps = 11, 0.1
    sn_class(np.full(p, 1 / p), eps)
    a = np.zeros(p)
    a[3], a[-3] = 2 * eps / p, -2 * eps / p
    assert sn_class(1 / p + a, eps).a[3] == pytest.approx(2 * eps / p)
    b = np.zeros(p)
    b[3], b[5] = 0.01, -0.01
    with pytest.raises(NotMember) as err:
        sn_class(1 / p + b, eps)
    assert err.value.condition == 1
    with pytest.raises(NotMember) as err:
        sn_class(1 / p + 1.5 * a, eps)
    assert err.value.condition == 2


def test_sn_random_members_are_members(rng):
    for p in (10, 11, 20):
        sn_class(random_sn_measure(p, 0.2, rng), 0.2)


def test_sn_closure_and_negative_control():
    assert sn_closure_check(0.0, trials=50).passed
    assert sn_closure_check(0.2, trials=300, seed=1).passed
    assert sn_closure_check(0.2, trials=300, seed=1, lazy=True).passed
    assert not sn_closure_check(0.2, trials=300, seed=1, site=1).passed


# --- S_2N on the hypercube ---------------------------------------------------------------

def test_s2n_class_members_and_violations(rng):
    N, eps = 2, 0.3
    size = 16
    u = np.full(size, 1 / size)
    np.testing.assert_allclose(s2n_class(u, eps, N), 0)
    s2n_class(random_s2n_measure(eps, N, rng), eps, N)
    lev = gallery.popcounts(size)
    bump = np.where(lev == 3, eps / size, np.where(lev == 1, -eps / size, 0.0))
    s2n_class(u + bump, eps, N)
    bad = u.copy()
    i3 = np.flatnonzero(lev == 3)
    bad[i3[0]] += 0.01
    bad[i3[1]] -= 0.01
    with pytest.raises(NotMember) as err:
        s2n_class(bad, eps, N)
    assert err.value.condition == 2
    with pytest.raises(NotMember) as err:
        s2n_class(u + 1.5 * bump, eps, N)
    assert err.value.condition == 3


def test_s2n_closure_and_negative_control():
    cert = s2n_closure_check(0.2, 2, trials=200)
    assert cert.passed and cert.value <= 1.5
    assert not s2n_closure_check(0.2, 2, trials=200, corrupt=True).passed


# --- perturbed birth and death ------------------------------------------------------------

def test_bd_perturbation_zero_and_balance():
    inst = gallery.metropolis_bd(1.0, 5)
    Q, nu = inst.kernel.matrix, inst.measures["target"].weights
    b, nu0, c0 = bd_perturbation_stability(Q, nu, 0.0)
    np.testing.assert_array_equal(b, Q)
    assert c0 == 1.0
    q0 = inst.constants["q0"].value
    s = q0 / 2
    b, nus, c = bd_perturbation_stability(Q, nu, s)
    assert nus.sum() == pytest.approx(1.0)
    assert check_reversible(b, nus)[0]
    assert c == pytest.approx(3.0)
    assert np.max(np.maximum(nus / nu, nu / nus)) <= c + 1e-12


def test_bd_perturbation_transfer_over_schedules():
    # stable with respect to nu_s, so within c^2 of nu
    inst = gallery.metropolis_bd(1.0, 4)
    Q, nu = inst.kernel.matrix, inst.measures["target"].weights
    q0 = inst.constants["q0"].value
    ks, cs = [], []
    for s in (-q0 / 2, 0, q0 / 3):
        b, _, c = bd_perturbation_stability(Q, nu, s)
        ks.append(b)
        cs.append(c)
    cert = search_c_stability(ks, nu, 200, mode="sampled", samples=30)
    assert cert.observed_c <= max(cs) ** 2


def test_bd_perturbation_errors():
    inst = gallery.metropolis_bd(1.0, 3)
    Q, nu = inst.kernel.matrix, inst.measures["target"].weights
    with pytest.raises(PerturbationTooLarge):
        bd_perturbation_stability(Q, nu, 1.0)
    with pytest.raises(NotSymmetricBD):
        bd_perturbation_stability(gallery.circle_kernel(7, 0.0).matrix, np.full(7, 1 / 7), 0.01)
