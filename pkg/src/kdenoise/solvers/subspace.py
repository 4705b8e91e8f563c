"""Subspace-domain solver: orthogonal projection onto a principal subspace.

For the cone of measures supported on linear subspaces of fixed dimension,
the dominance-constrained variance maximization reduces to the Wasserstein
projection, i.e. classical PCA: project the (centered) data onto the span of
the leading covariance eigenvectors.  The residual spectrum gives the noise
variance estimator used by the factor-model recovery.
"""

from __future__ import annotations

import numpy as np

from ..measures import DiscreteMeasure, barycenter, variance
from ..transport import Coupling
from .common import principal_directions
from .types import SolveReport, Subspace, DomainError


def solve_subspace(nu: DiscreteMeasure, subspace_dim: int, seed: int = 0) -> SolveReport:
    """Project nu onto its top-``subspace_dim`` principal subspace.

    The projection coupling (each data atom to its own image) is optimal:
    the squared cost splits as |y - x|^2 = |Py - x|^2 + |y - Py|^2 for any x
    in the subspace, so W2^2(mu*, nu) equals the residual moment exactly and
    the KDR slack is exactly 0.  Diagnostics use these identities; no LP is
    needed, which keeps this solver linear in the number of atoms.

    Returns a report whose ``extras`` carry the eigen data and the noise
    variance estimator (residual moment over (d - m)).
    """
    d = nu.dim
    if not 1 <= subspace_dim <= d:
        raise DomainError(f"subspace_dim must be in [1, {d}], got {subspace_dim}")
    b = barycenter(nu)
    yc = nu.points - b
    vals, vecs = principal_directions(nu)
    U = vecs[:, :subspace_dim]
    proj = yc @ U @ U.T
    mu_star = DiscreteMeasure(proj + b, nu.weights)
    residual2 = float(nu.weights @ ((yc - proj) ** 2).sum(axis=1))
    top_var = float(vals[:subspace_dim].sum())
    noise_variance = residual2 / (d - subspace_dim) if subspace_dim < d else 0.0
    # dense n x n plans get out of hand for large samples; the projection
    # coupling is diagonal, so only materialize it at desk scale
    coupling = Coupling(np.diag(nu.weights), mu_star, nu) if nu.n_atoms <= 4000 else None
    return SolveReport(
        mu_star=mu_star,
        coupling=coupling,
        variance=variance(mu_star),
        w2_squared=residual2,
        kdr_slack=0.0,
        domain_residuals={"subspace_fit_residual": residual2},
        iterations=1,
        converged=True,
        seed=seed,
        extras={
            "noise_variance": noise_variance,
            "eigenvalues": vals,
            "basis": U,
            "barycenter": b,
            "top_variance": top_var,
        },
    )


def solve_subspace_domain(nu: DiscreteMeasure, domain: Subspace, seed: int = 0) -> SolveReport:
    return solve_subspace(nu, domain.subspace_dim, seed=seed)
