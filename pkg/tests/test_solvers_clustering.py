import numpy as np
import pytest

from kdenoise import (
    barycenter,
    is_convex_order,
    is_monotone_support,
    uniform_measure,
    variance,
    w2_squared,
)
from kdenoise.experiments import InstabilityKernel, generate
from kdenoise.solvers import (
    DiscreteSupport,
    MonotonePenalty,
    SolverConfig,
    SolverScaleError,
    solve_convex_order_penalty,
    solve_discrete_support,
    solve_kdr,
)

from conftest import random_measure
from oracles import kmeans_enumerate


def test_lloyd_single_center_is_barycenter(rng):
    nu = random_measure(rng, n_atoms=7, dim=2)
    rep = solve_discrete_support(nu, 1)
    np.testing.assert_allclose(rep.mu_star.points[0], barycenter(nu), atol=1e-12)
    assert rep.converged


def test_lloyd_m_equals_n_recovers_data(rng):
    nu = uniform_measure(rng.normal(size=(6, 2)))
    rep = solve_discrete_support(nu, 6)
    assert rep.w2_squared == pytest.approx(0.0, abs=1e-12)
    assert rep.converged


def test_lloyd_two_clusters_1d():
    nu = uniform_measure([[0.0], [1.0], [10.0], [11.0]])
    rep = solve_discrete_support(nu, 2)
    centers = sorted(rep.mu_star.points.ravel().tolist())
    assert centers == pytest.approx([0.5, 10.5], abs=1e-12)
    assert rep.w2_squared == pytest.approx(0.25, abs=1e-10)


def test_lloyd_matches_enumeration_oracle(rng):
    # global optimum by brute force on small instances; Lloyd from the seeded
    # init should match on these well-separated clouds
    pts = np.concatenate([
        rng.normal(size=(3, 2)) * 0.1 + [0, 0],
        rng.normal(size=(3, 2)) * 0.1 + [5, 5],
    ])
    nu = uniform_measure(pts)
    best_cost, _, _ = kmeans_enumerate(pts, nu.weights, 2)
    rep = solve_discrete_support(nu, 2)
    assert rep.w2_squared == pytest.approx(best_cost, abs=1e-10)


def test_lloyd_fixed_point_is_martingale_and_convex_order(rng):
    for _ in range(3):
        nu = random_measure(rng, n_atoms=12, dim=2)
        rep = solve_discrete_support(nu, 3)
        assert rep.domain_residuals["martingale_residual"] <= 1e-10
        assert is_convex_order(rep.mu_star, nu).dominated


def test_lloyd_monotone_cost_decrease(rng):
    # assignment + recenter never increases the coupling cost along the sweep
    from kdenoise import Coupling, barycentric_recenter, coupling_cost
    from kdenoise.solvers.clustering import _nearest_assignment

    nu = random_measure(rng, n_atoms=20, dim=2)
    centers = nu.points[rng.choice(20, size=4, replace=False)].copy()
    prev = np.inf
    for _ in range(12):
        mass = _nearest_assignment(centers, nu)
        keep = mass.sum(axis=1) > 0
        src = nu.__class__(centers[keep], mass[keep].sum(axis=1))
        pi = Coupling(mass[keep], src, nu)
        cost_before = coupling_cost(pi)
        assert cost_before <= prev + 1e-12
        recentered, pi2 = barycentric_recenter(pi)
        prev = coupling_cost(pi2)
        assert prev <= cost_before + 1e-12
        centers = recentered.points.copy()
    assert prev <= variance(nu) + 1e-12


def test_lloyd_fixed_weights_exact_coupling():
    nu = uniform_measure([[0.0], [1.0], [10.0], [11.0]])
    rep = solve_discrete_support(nu, 2, fixed_weights=np.array([0.5, 0.5]))
    assert rep.domain_residuals["martingale_residual"] <= 1e-10
    np.testing.assert_allclose(rep.mu_star.weights, [0.5, 0.5], atol=1e-12)


def test_lloyd_empty_cluster_reseeded(rng):
    # duplicate atoms make collisions likely; the reseed path must still
    # produce a valid fixed point
    pts = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5)
    nu = uniform_measure(pts)
    rep = solve_discrete_support(nu, 2, cfg=SolverConfig(seed=3))
    assert rep.w2_squared == pytest.approx(0.0, abs=1e-12)


# -------------------------------------------------- penalty solver


def test_penalty_zero_reduces_to_fixed_weight_lloyd():
    nu = uniform_measure([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]])
    rep = solve_convex_order_penalty(
        nu, MonotonePenalty(m=2, penalty_weight=0.0), SolverConfig(seed=0)
    )
    lloyd = solve_discrete_support(nu, 2, fixed_weights=np.full(2, 0.5))
    assert rep.variance == pytest.approx(lloyd.variance, abs=1e-10)
    assert rep.w2_squared == pytest.approx(lloyd.w2_squared, abs=1e-10)
    assert rep.domain_residuals["martingale_residual"] <= 1e-10


def test_penalty_instability_example_monotone_martingale():
    nu1 = generate(InstabilityKernel(n_index=1))
    rep = solve_convex_order_penalty(
        nu1, MonotonePenalty(m=3, penalty_weight=1.0), SolverConfig(seed=2)
    )
    assert rep.domain_residuals["martingale_residual"] <= 1e-4
    assert is_monotone_support(rep.mu_star)
    assert rep.extras["convex_order_dominated"]
    # the variance-maximizing monotone measure below nu_1 is the original
    # three-atom signal
    assert rep.variance == pytest.approx(2 / 3, abs=1e-3)


def test_penalty_supplement_a_objective_comparison():
    # the solver's objective (martingale transport cost) evaluated on the two
    # given couplings: the three-atom one beats the two-atom one
    from kdenoise.solvers import comparison_measures
    from kdenoise import coupling_cost

    _, _, _, pi_k, pi_m = comparison_measures()
    assert coupling_cost(pi_m) == pytest.approx(4.1, abs=1e-12)
    assert coupling_cost(pi_k) == pytest.approx(4.5, abs=1e-12)
    assert coupling_cost(pi_m) < coupling_cost(pi_k)


def test_penalty_scale_guard():
    nu = uniform_measure(np.random.default_rng(0).normal(size=(3000, 2)))
    with pytest.raises(SolverScaleError):
        solve_convex_order_penalty(nu, MonotonePenalty(m=21, penalty_weight=1.0))


def test_solve_kdr_dispatch_discrete(rng):
    nu = random_measure(rng, n_atoms=8, dim=2)
    rep = solve_kdr(nu, DiscreteSupport(m=1))
    np.testing.assert_allclose(rep.mu_star.points[0], barycenter(nu), atol=1e-12)
