import numpy as np
import pytest

from kdenoise import variance
from kdenoise.solvers import comparison_measures, verify_kramkov_comparison


def test_couplings_are_martingale():
    _, _, _, pi_k, pi_m = comparison_measures()
    assert pi_k.martingale_residual() <= 1e-12
    assert pi_m.martingale_residual() <= 1e-12


def test_quadratic_costs_by_direct_arithmetic():
    # by hand over the support: pi_k has four cells each of cost 4.5 and mass
    # 1/4, pi_m mixes cells of costs 0.5, 12.5, and 6.5
    rep = verify_kramkov_comparison()
    assert rep.quadratic_cost_k == pytest.approx(4.5, abs=1e-12)
    assert rep.quadratic_cost_m == pytest.approx(4.1, abs=1e-12)
    assert rep.quadratic_cost_m < rep.quadratic_cost_k


def test_pair_inequality_holds_everywhere():
    assert verify_kramkov_comparison().pair_inequality_holds


def test_martingale_variance_identity():
    # E|X-Y|^2 = Var(nu) - Var(mu) for martingale couplings
    mu_k, mu_m, nu, pi_k, pi_m = comparison_measures()
    rep = verify_kramkov_comparison()
    assert rep.variance_gap_k == pytest.approx(4.5, abs=1e-12)
    assert variance(nu) - variance(mu_m) == pytest.approx(4.1, abs=1e-12)
    assert rep.passed


def test_marginals_match_the_stated_measures():
    mu_k, mu_m, nu, pi_k, pi_m = comparison_measures()
    np.testing.assert_allclose(pi_k.mass.sum(axis=1), mu_k.weights, atol=1e-15)
    np.testing.assert_allclose(pi_m.mass.sum(axis=1), mu_m.weights, atol=1e-15)
    np.testing.assert_allclose(pi_k.mass.sum(axis=0), nu.weights, atol=1e-15)
    np.testing.assert_allclose(pi_m.mass.sum(axis=0), nu.weights, atol=1e-15)
