import numpy as np
import pytest

from kdenoise import center, uniform_measure, variance, w2_squared
from kdenoise.experiments import FactorModel, generate
from kdenoise.solvers import DomainError, Subspace, solve_kdr, solve_subspace

from conftest import random_measure


def test_line_data_recovered_exactly():
    nu = uniform_measure([[-1.0, -1.0], [1.0, 1.0]])
    rep = solve_subspace(nu, 1)
    np.testing.assert_allclose(rep.mu_star.points, nu.points, atol=1e-12)
    assert rep.variance == pytest.approx(2.0, abs=1e-12)
    assert rep.extras["noise_variance"] == pytest.approx(0.0, abs=1e-12)


def test_projection_coupling_identities(rng):
    # W2^2 equals the residual moment and the dominance slack is exactly zero
    # for orthogonal projections; cross-check against the exact LP
    nu = center(random_measure(rng, n_atoms=12, dim=3))
    rep = solve_subspace(nu, 2)
    lp = w2_squared(rep.mu_star, nu).value
    assert rep.w2_squared == pytest.approx(lp, abs=1e-10)
    assert rep.kdr_slack == 0.0


def test_variance_matches_eigen_oracle(rng):
    nu = center(random_measure(rng, n_atoms=40, dim=4, scale=1.0))
    yc = nu.points - nu.weights @ nu.points
    cov = (yc * nu.weights[:, None]).T @ yc
    vals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    for k in (1, 2, 3):
        rep = solve_subspace(nu, k)
        assert rep.variance == pytest.approx(float(vals[:k].sum()), abs=1e-10)


def test_isotropic_top_eigenvalue(rng):
    pts = rng.standard_normal((4000, 3))
    nu = uniform_measure(pts)
    rep = solve_subspace(nu, 1)
    yc = pts - pts.mean(axis=0)
    top = float(np.linalg.eigvalsh((yc.T @ yc) / len(pts))[-1])
    assert rep.variance == pytest.approx(top, abs=1e-9)
    assert abs(rep.variance - 1.0) < 0.2  # sampling tolerance around 1


def test_factor_model_recovery_small():
    L_star = np.array([[1.5, 0.0], [0.0, 1.0], [0.5, 0.5], [0.2, -0.4], [-0.3, 0.1]])
    sigma = 0.4
    nu = generate(FactorModel(
        d=5, m=2, loadings=tuple(map(tuple, L_star)), sigma=sigma, n=20000, seed=42,
    ))
    rep = solve_subspace(nu, 2)
    U = rep.extras["basis"]
    vals = rep.extras["eigenvalues"]
    sigma_n2 = rep.extras["noise_variance"]
    recovered = U @ np.diag(vals[:2]) @ U.T - sigma_n2 * (U @ U.T)
    assert np.linalg.norm(recovered - L_star @ L_star.T) <= 0.1
    assert abs(sigma_n2 - sigma**2) <= 0.05


def test_subspace_dim_validation(rng):
    nu = random_measure(rng, n_atoms=5, dim=2)
    with pytest.raises(DomainError):
        solve_subspace(nu, 3)
    with pytest.raises(DomainError):
        solve_subspace(nu, 0)


def test_relaxed_value_stability_under_perturbation(rng):
    # perturbing the data by vanishing W2 amounts changes the optimal
    # projection value continuously
    from kdenoise import DiscreteMeasure

    nu = center(random_measure(rng, n_atoms=30, dim=2, scale=1.0))
    base = solve_subspace(nu, 1).w2_squared
    noise = rng.normal(size=nu.points.shape)
    gaps = []
    for d in [1e-2, 1e-3, 1e-4, 1e-5]:
        shaken = center(DiscreteMeasure(nu.points + d * noise, nu.weights))
        gaps.append(abs(solve_subspace(shaken, 1).w2_squared - base))
    assert gaps[-1] <= 1e-3
    assert gaps[-1] <= gaps[0] + 1e-12


def test_dispatch(rng):
    nu = random_measure(rng, n_atoms=6, dim=3)
    rep = solve_kdr(nu, Subspace(subspace_dim=2))
    assert rep.converged
