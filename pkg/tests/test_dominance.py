import numpy as np
import pytest

from kdenoise import (
    Coupling,
    DiscreteMeasure,
    barycenter,
    barycentric_recenter,
    center,
    coupling_cost,
    dirac,
    is_convex_order,
    is_monotone_support,
    kdr_check,
    second_moment,
    translate,
    uniform_measure,
    w2_squared,
)

from conftest import random_measure

MU_1D = DiscreteMeasure([[-4.0], [2.0]], [1 / 3, 2 / 3])
NU_1D = uniform_measure([[-4.0], [0.0], [4.0]])
THETA_1D = DiscreteMeasure([[-3.0], [6.0]], [2 / 3, 1 / 3])

MU_2D = uniform_measure([[0.0, -1.0], [0.0, 1.0]])
NU_2D = uniform_measure([[-1.0, -1.0], [1.0, 1.0]])
THETA_2D = uniform_measure([[-2.0, 0.0], [2.0, 0.0]])


def instability_mu():
    return uniform_measure([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])


def instability_nu(n):
    theta = np.pi * (1 - 1 / (2 * (n + 1)))
    off = np.array([np.cos(theta), np.sin(theta)])
    mu = instability_mu()
    return uniform_measure(np.vstack([mu.points + off, mu.points - off]))


# ------------------------------------------------------------ convex order


def test_dirac_at_barycenter_always_dominated(rng):
    for _ in range(5):
        nu = random_measure(rng, n_atoms=6, dim=2)
        mu = dirac(barycenter(nu))
        verdict = is_convex_order(mu, nu)
        assert verdict.dominated
        assert verdict.max_residual <= 1e-10


def test_instability_example_dominated_with_kernel_witness():
    mu = instability_mu()
    nu1 = instability_nu(1)
    verdict = is_convex_order(mu, nu1)
    assert verdict.dominated
    assert verdict.max_residual <= 1e-10
    # the kernel coupling itself is the natural witness: each source atom
    # splits half-and-half to its two offsets
    kernel = np.zeros((3, 6))
    for i in range(3):
        kernel[i, i] = kernel[i, i + 3] = 1 / 6
    pi = Coupling(kernel, mu, nu1)
    assert pi.martingale_residual() <= 1e-15


def test_2d_mu_theta_not_dominated():
    verdict = is_convex_order(MU_2D, THETA_2D)
    assert not verdict.dominated
    assert verdict.witness is None
    assert verdict.max_residual > 1e-3


def test_convex_order_1d_pair_holds():
    # mu -> nu splits atom 2 into {0, 4}: an explicit martingale coupling
    assert is_convex_order(MU_1D, NU_1D).dominated


# ---------------------------------------------------------------- KDR


def test_kdr_1d_triple_verdicts():
    v1 = kdr_check(MU_1D, NU_1D)
    v2 = kdr_check(NU_1D, THETA_1D)
    v3 = kdr_check(MU_1D, THETA_1D)
    assert (v1.dominated, v2.dominated, v3.dominated) == (True, True, False)
    # boundary pair sits exactly at zero slack: 8/3 = 32/3 - 8
    assert v1.slack == pytest.approx(0.0, abs=1e-9)


def test_kdr_2d_triple_verdicts_and_slacks():
    v1 = kdr_check(MU_2D, NU_2D)
    v2 = kdr_check(NU_2D, THETA_2D)
    v3 = kdr_check(MU_2D, THETA_2D)
    assert (v1.dominated, v2.dominated, v3.dominated) == (True, True, False)
    assert v1.slack == pytest.approx(0.0, abs=1e-9)
    assert v2.slack == pytest.approx(0.0, abs=1e-9)
    # slack = (int |z|^2 dtheta - int |x|^2 dmu) - W2^2 = 3 - 5
    assert v3.slack == pytest.approx(-2.0, abs=1e-9)


def test_kdr_dirac_vs_centered(rng):
    nu = center(random_measure(rng, n_atoms=5, dim=2))
    v = kdr_check(dirac(np.zeros(2)), nu)
    assert v.dominated
    assert v.slack == pytest.approx(0.0, abs=1e-9)


def test_kdr_translation_invariance(rng):
    for _ in range(5):
        mu = random_measure(rng, n_atoms=4, dim=2)
        nu = random_measure(rng, n_atoms=5, dim=2)
        a = rng.normal(size=2) * 3
        v0 = kdr_check(mu, nu)
        v1 = kdr_check(translate(mu, a), translate(nu, a))
        assert v0.dominated == v1.dominated
        assert v0.slack == pytest.approx(v1.slack, abs=1e-8)


def test_convex_order_implies_kdr(rng):
    # random dominated pairs built by barycentric recentering
    hits = 0
    for _ in range(20):
        nu = center(random_measure(rng, n_atoms=6, dim=2))
        pi_mass = rng.dirichlet(np.ones(6), size=3)
        pi_mass = pi_mass / pi_mass.sum() * 1.0
        # rescale columns to nu weights
        pi_mass = pi_mass * (nu.weights / pi_mass.sum(axis=0))[None, :]
        src = DiscreteMeasure(rng.normal(size=(3, 2)), pi_mass.sum(axis=1))
        mu, _ = barycentric_recenter(Coupling(pi_mass, src, nu))
        if is_convex_order(mu, nu).dominated:
            hits += 1
            assert kdr_check(mu, nu).dominated
    assert hits >= 15  # recentered couplings are martingale, so nearly all hit


def test_moment_bound_for_dominated_pairs(rng):
    for _ in range(10):
        nu = center(random_measure(rng, n_atoms=7, dim=2, scale=3.0))
        mass = rng.dirichlet(np.ones(7), size=4)
        mass = mass * (nu.weights / mass.sum(axis=0))[None, :]
        src = DiscreteMeasure(rng.normal(size=(4, 2)), mass.sum(axis=1))
        mu, _ = barycentric_recenter(Coupling(mass, src, nu))
        assert kdr_check(mu, nu).dominated
        m2_nu = second_moment(nu)
        norms2 = (mu.points**2).sum(axis=1)
        for alpha in np.linspace(0.1, 4 * m2_nu, 20):
            tail = mu.weights[norms2 >= alpha].sum()
            assert tail <= m2_nu / alpha + 1e-10


# ------------------------------------------------------------- recentering


def test_recenter_product_coupling_gives_dirac(rng):
    nu = center(random_measure(rng, n_atoms=6, dim=2))
    mu = random_measure(rng, n_atoms=3, dim=2)
    product = Coupling(np.outer(mu.weights, nu.weights), mu, nu)
    out, pi = barycentric_recenter(product)
    assert np.abs(out.points).max() <= 1e-12
    assert pi.martingale_residual() <= 1e-12


def test_recenter_fixed_point_on_martingale(rng):
    mu = instability_mu()
    nu = instability_nu(2)
    kernel = np.zeros((3, 6))
    for i in range(3):
        kernel[i, i] = kernel[i, i + 3] = 1 / 6
    pi = Coupling(kernel, mu, nu)
    out, pi2 = barycentric_recenter(pi)
    np.testing.assert_allclose(out.points, mu.points, atol=1e-12)
    np.testing.assert_allclose(pi2.mass, pi.mass, atol=1e-15)


def test_recenter_supplement_a_kernel():
    # pi_k from the two-atom comparison measure is martingale, so recentering
    # returns its own source
    mu_k = uniform_measure([[-1.5, 1.5], [0.5, 3.5]])
    nu = uniform_measure([[0.0, 0.0], [-3.0, 3.0], [2.0, 2.0], [-1.0, 5.0]])
    mass = np.array([
        [0.25, 0.25, 0.0, 0.0],
        [0.0, 0.0, 0.25, 0.25],
    ])
    out, _ = barycentric_recenter(Coupling(mass, mu_k, nu))
    np.testing.assert_allclose(out.points, mu_k.points, atol=1e-12)


def test_recenter_never_increases_quadratic_cost(rng):
    for _ in range(10):
        mu = random_measure(rng, n_atoms=4, dim=2)
        nu = random_measure(rng, n_atoms=6, dim=2)
        mass = np.outer(mu.weights, nu.weights)
        pi = Coupling(mass, mu, nu)
        _, pi2 = barycentric_recenter(pi)
        assert coupling_cost(pi2) <= coupling_cost(pi) + 1e-10


def test_recenter_drops_zero_rows():
    mu = DiscreteMeasure([[0.0], [9.0]], [1.0, 0.0])
    nu = uniform_measure([[-1.0], [1.0]])
    mass = np.array([[0.5, 0.5], [0.0, 0.0]])
    out, pi = barycentric_recenter(Coupling(mass, mu, nu))
    assert out.n_atoms == 1
    assert pi.mass.shape == (1, 2)


# ------------------------------------------------------------ monotonicity


def test_monotone_support_axis_points():
    nu_inf = DiscreteMeasure(
        [[-2.0, 0.0], [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
        [1 / 6, 1 / 6, 1 / 3, 1 / 6, 1 / 6],
    )
    assert is_monotone_support(nu_inf)


def test_monotone_support_rejects_decreasing():
    mu = uniform_measure([[0.0, 1.0], [1.0, 0.0]])
    assert not is_monotone_support(mu)
    with pytest.raises(ValueError):
        is_monotone_support(uniform_measure([[0.0], [1.0]]))


def test_nontransitivity_triples_exact():
    got_1d = tuple(
        kdr_check(a, b).dominated
        for a, b in [(MU_1D, NU_1D), (NU_1D, THETA_1D), (MU_1D, THETA_1D)]
    )
    got_2d = tuple(
        kdr_check(a, b).dominated
        for a, b in [(MU_2D, NU_2D), (NU_2D, THETA_2D), (MU_2D, THETA_2D)]
    )
    assert got_1d == (True, True, False)
    assert got_2d == (True, True, False)
