"""Order relations between discrete measures and barycentric recentering.

Two relations are decided here.  Convex order (mu below nu iff a martingale
coupling exists, by Strassen) is an LP feasibility problem: find a coupling
whose conditional target means reproduce the source atoms.  Kantorovich
dominance is weaker and cheap: after translating both measures by minus the
barycenter of nu, it only asks that the best coupling correlation reach the
second moment of mu, or equivalently that

    W2^2(mu', nu')  <=  int |y|^2 dnu'  -  int |x|^2 dmu'.

``kdr_check`` computes the slack through both routes and insists they agree;
the reported slack is the right-hand side minus the left (the moment-gap
form), which is exactly twice the correlation-form excess.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .measures import DiscreteMeasure, barycenter, second_moment, translate
from .transport import (
    Coupling,
    _HIGHS_OPTIONS,
    _marginal_matrix,
    max_correlation,
    w2_squared,
)

__all__ = [
    "ConvexOrderVerdict",
    "KdrVerdict",
    "is_convex_order",
    "kdr_check",
    "barycentric_recenter",
    "is_monotone_support",
]

DEFAULT_FEAS_TOL = 1e-8
DEFAULT_SLACK_TOL = 1e-9
ROUTE_AGREEMENT_TOL = 1e-8
MONOTONE_TOL = -1e-12


@dataclass(frozen=True)
class ConvexOrderVerdict:
    dominated: bool
    witness: Optional[Coupling]
    max_residual: float


@dataclass(frozen=True)
class KdrVerdict:
    """dominated iff slack >= -slack_tol, where slack is the moment-gap form."""

    dominated: bool
    slack: float
    witness: Coupling


def is_convex_order(
    mu: DiscreteMeasure, nu: DiscreteMeasure, feas_tol: float = DEFAULT_FEAS_TOL
) -> ConvexOrderVerdict:
    """Decide mu <=_C nu by a phase-1 LP on the martingale coupling system.

    Variables are the coupling entries plus split slacks on the d conditional
    mean equalities per source atom; the LP minimizes the total slack.  The
    verdict is dominated iff the witness coupling's conditional-mean defect
    (sup norm, conditioned on positive-weight atoms) is within feas_tol.

    Infeasibility is a verdict, never an exception.
    """
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    m, d = mu.n_atoms, mu.dim
    n = nu.n_atoms
    nv = m * n
    A_marg = sparse.hstack([_marginal_matrix(m, n), sparse.csr_matrix((m + n, 2 * m * d))])
    # martingale rows: sum_j pi_ij y_jk + s+_ik - s-_ik = u_i x_ik
    # row (i, k) touches columns i*n + j with coefficient y_{jk}
    rows = np.repeat(np.arange(m * d), n)
    cols = (np.repeat(np.arange(m), d)[:, None] * n + np.arange(n)[None, :]).reshape(-1)
    coef = np.tile(nu.points.T.reshape(-1), m)
    A_mart = sparse.csr_matrix((coef, (rows, cols)), shape=(m * d, nv))
    A_mart = sparse.hstack([A_mart, sparse.eye(m * d), -sparse.eye(m * d)])
    A = sparse.vstack([A_marg, A_mart]).tocsr()
    b = np.concatenate([mu.weights, nu.weights, (mu.weights[:, None] * mu.points).ravel()])
    c = np.concatenate([np.zeros(nv), np.ones(2 * m * d)])
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds",
                  options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"convex-order LP failed: status={res.status} {res.message}")
    plan = res.x[:nv].reshape(m, n)
    witness = Coupling(np.clip(plan, 0.0, None), mu, nu)
    pos = mu.weights > 0
    defect = witness.conditional_means()[pos] - mu.points[pos]
    max_residual = float(np.abs(defect).max()) if pos.any() else 0.0
    dominated = max_residual <= feas_tol
    return ConvexOrderVerdict(
        dominated=dominated,
        witness=witness if dominated else None,
        max_residual=max_residual,
    )


def kdr_check(
    mu: DiscreteMeasure, nu: DiscreteMeasure, slack_tol: float = DEFAULT_SLACK_TOL
) -> KdrVerdict:
    """Decide Kantorovich dominance mu <=_K nu.

    Both measures are translated by -barycenter(nu); the slack is

        slack = int |y|^2 dnu' - int |x|^2 dmu' - W2^2(mu', nu'),

    and dominance holds iff slack >= -slack_tol.  The correlation route
    (max-correlation minus second moment) is computed from an independent LP
    solve and must equal slack/2 within 1e-8 — a built-in self-check of the
    two equivalent formulations.
    """
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    shift = -barycenter(nu)
    mu_c = translate(mu, shift)
    nu_c = translate(nu, shift)
    corr = max_correlation(mu_c, nu_c)
    m2_mu = second_moment(mu_c)
    m2_nu = second_moment(nu_c)
    corr_excess = corr.value - m2_mu
    w2 = w2_squared(mu_c, nu_c).value
    slack = m2_nu - m2_mu - w2
    if abs(slack - 2.0 * corr_excess) > ROUTE_AGREEMENT_TOL * max(1.0, abs(m2_nu)):
        raise AssertionError(
            f"KDR route mismatch: moment-gap slack {slack:.3e} vs "
            f"2 x correlation excess {2 * corr_excess:.3e}"
        )
    return KdrVerdict(
        dominated=bool(slack >= -slack_tol),
        slack=float(slack),
        witness=Coupling(corr.coupling.mass, mu, nu),
    )


def barycentric_recenter(pi: Coupling) -> tuple[DiscreteMeasure, Coupling]:
    """Move each source atom to its conditional target mean.

    Returns the recentered measure (c_pi)#mu and the recentered coupling,
    which is a martingale coupling by construction.  Zero-weight rows are
    dropped.
    """
    u = pi.mass.sum(axis=1)
    keep = u > 0
    mass = pi.mass[keep]
    u = u[keep]
    s = u.sum()  # = 1 up to the coupling's marginal tolerance
    cmeans = (mass @ pi.target.points) / u[:, None]
    recentered = DiscreteMeasure(cmeans, u / s)
    return recentered, Coupling(mass / s, recentered, pi.target)


def is_monotone_support(mu: DiscreteMeasure, tol: float = MONOTONE_TOL) -> bool:
    """Whether every support pair satisfies (y1-x1)(y2-x2) >= tol (R^2 only)."""
    if mu.dim != 2:
        raise ValueError(f"monotone support is defined on R^2, got d={mu.dim}")
    p = mu.points
    d1 = p[:, None, 0] - p[None, :, 0]
    d2 = p[:, None, 1] - p[None, :, 1]
    return bool((d1 * d2 >= tol).all())
