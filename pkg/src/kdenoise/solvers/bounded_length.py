"""Primal-dual solver for bounded-length curves with free weights.

Maximizes the variance Lagrangian over atom positions and weights by
gradient ascent, with an entropic inner solve (warm-started potentials) for
the transport plan feeding the dominance constraint, and projected gradient
descent on the four multiplier groups: the weight-sum equality, the weight
nonnegativity bounds, the length bound, and the dominance inequality.
The weight ascent direction is projected onto the mass hyperplane (its
common mode would otherwise inflate every weight and leave the sum
multiplier in an unbounded catch-up).

Convergence is declared when the contract's conditions hold on the
delivered measure: weight sum exact, weights nonnegative, length within
bound, and exact-LP dominance slack within tolerance.  Delivery includes a
polish: weights clipped and renormalized, the curve contracted about the
data barycenter when the length bound or the dominance constraint is
violated (contractions preserve both), and every reported diagnostic is
recomputed exactly on the delivered measure.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..measures import DiscreteMeasure, barycenter, translate
from ..transport import _round_to_marginals, _sinkhorn_stage, max_correlation
from .common import exact_diagnostics, pc_line_init, polyline_length
from .types import SolveReport, SolverConfig

SEGMENT_FLOOR = 1e-9


def _length_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
    """(L(x), dL/dx); zero-length segments contribute zero gradient."""
    seg = np.diff(x, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    unit = np.where(
        norms[:, None] > SEGMENT_FLOOR,
        seg / np.maximum(norms, SEGMENT_FLOOR)[:, None],
        0.0,
    )
    grad = np.zeros_like(x)
    grad[1:] += unit
    grad[:-1] -= unit
    return float(norms.sum()), grad


def _deliverable(x, u, B, nu_c):
    """Clip weights, contract onto the dominance set, return (x, u, scale).

    Works in the centered frame.  The contraction factor is maxcorr / m2 when
    the correlation falls short of the second moment (the dominance equality
    scaling); it is <= 1, so the length bound stays satisfied.
    """
    u = np.clip(u, 0.0, None)
    u = u / u.sum()
    keep = u > 0
    x = x[keep]
    u = u[keep]
    L = polyline_length(x)
    if L > B * (1 + 1e-12):
        xb = u @ x
        x = xb + (B / L) * (x - xb)
    mu_c = DiscreteMeasure(x, u)
    m2 = float(u @ (x**2).sum(axis=1))
    if m2 > 0:
        corr = max_correlation(mu_c, nu_c).value
        if corr < m2:
            s = max(corr, 0.0) / m2
            x = s * x
            mu_c = DiscreteMeasure(x, u)
    return mu_c


def solve_bounded_length(
    nu: DiscreteMeasure, m: int, B: float, cfg: Optional[SolverConfig] = None
) -> SolveReport:
    if B <= 0:
        raise ValueError("B must be > 0 (the zero-length domain is a point mass)")
    cfg = cfg or SolverConfig()
    b = barycenter(nu)
    nu_c = translate(nu, -b)
    Y = nu_c.points
    v = nu_c.weights
    m2_nu = float(v @ (Y**2).sum(axis=1))

    x = pc_line_init(nu_c, m)
    L0 = polyline_length(x)
    if L0 > 0.9 * B:
        x *= 0.9 * B / L0
    u = np.full(m, 1.0 / m)

    lam1 = 0.0
    lam1i = np.zeros(m)
    lam2 = 0.0
    lam3 = 0.0
    eta_x = cfg.step_size_x
    eta_u = cfg.step_size_u
    eta = cfg.multiplier_step_sizes

    # fixed inner regularization from the initial cost scale unless given
    cost0 = ((x[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    if cfg.sinkhorn is not None:
        eps = cfg.sinkhorn.epsilon
        inner_cap = min(cfg.sinkhorn.max_iter, 200)
    else:
        eps = max(1e-2 * float(cost0.mean()), 1e-12)
        inner_cap = 15
    f = np.zeros(m)
    g = np.zeros(nu_c.n_atoms)

    it = 0
    raw: dict = {}
    slack_tol = 1e-3 * max(m2_nu, 1e-12)
    # tail averages: the dual oscillates around the saddle with slowly
    # decaying amplitude, and the averaged iterate settles much faster
    warmup = max(1000, cfg.max_outer_iter // 5)
    x_avg = np.zeros_like(x)
    u_avg = np.zeros_like(u)
    n_avg = 0
    for it in range(1, cfg.max_outer_iter + 1):
        decay = 1.0 / np.sqrt(it)
        u_pos = np.clip(u, 1e-15, None)
        u_mrg = u_pos / u_pos.sum()
        cost = ((x[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        f, g, _, _ = _sinkhorn_stage(
            u_mrg, v, cost, eps, f, g, inner_cap, 1e-9, check_every=5
        )
        plan = np.exp(
            (f[:, None] + g[None, :] - cost) / eps
            + np.log(u_mrg)[:, None]
            + np.log(v)[None, :]
        )
        plan = _round_to_marginals(plan, u_mrg, v)
        w2_ent = float((cost * plan).sum())

        xbar = u @ x
        m2_mu = float(u @ (x**2).sum(axis=1))
        L, gL = _length_grad(x)

        # ascent on positions; the length term is the gradient of -lam2 * L
        pull = plan @ Y
        grad_x = (
            2.0 * u[:, None] * x
            - 2.0 * u[:, None] * xbar[None, :]
            - 2.0 * lam3 * u[:, None] * x
            - 2.0 * lam3 * (u_mrg[:, None] * x - pull)
            - lam2 * gL
        )
        # ascent on weights, projected onto the mass hyperplane
        grad_u = (
            (x**2).sum(axis=1)
            - 2.0 * (x @ xbar)
            - lam1
            + lam1i
            - lam3 * ((x**2).sum(axis=1) + (plan * cost).sum(axis=1))
        )
        grad_u = grad_u - grad_u.mean()
        x = x + eta_x * decay * grad_x
        u = u + eta_u * decay * grad_u

        # projected gradient descent on the multipliers
        kdr_violation = w2_ent - (m2_nu - m2_mu)
        lam1 = lam1 + eta["sum"] * decay * (u.sum() - 1.0)
        lam1i = np.maximum(0.0, lam1i - eta["nonneg"] * decay * u)
        lam2 = max(0.0, lam2 + eta["length"] * decay * (L - B))
        lam3 = max(0.0, lam3 + eta["kdr"] * decay * kdr_violation)

        if it > warmup:
            n_avg += 1
            x_avg += (x - x_avg) / n_avg
            u_avg += (u - u_avg) / n_avg

    raw = {
        "weight_sum_residual": abs(u.sum() - 1.0),
        "min_weight": float(u.min()),
        "length_excess": L - B,
        "kdr_violation_entropic": kdr_violation,
    }
    # deliver the best feasible of the averaged and the final iterate
    candidates = [(x.copy(), u.copy())]
    if n_avg > 0:
        candidates.insert(0, (x_avg, u_avg))
    best = None
    for xc, uc in candidates:
        mu_c = _deliverable(xc, uc, B, nu_c)
        mu_cand = translate(mu_c, b)
        diag = exact_diagnostics(mu_cand, nu)
        if best is None or diag["variance"] > best[1]["variance"]:
            best = (mu_cand, diag)
    mu_star, diag = best
    L_final = polyline_length(mu_star.points)
    residuals = {
        "length": L_final,
        "length_excess": L_final - B,
        "weight_sum_residual": abs(float(mu_star.weights.sum()) - 1.0),
        "min_weight": float(mu_star.weights.min()),
        "raw_iterate": raw,
        "multipliers": {
            "sum": lam1,
            "nonneg_max": float(lam1i.max()),
            "length": lam2,
            "kdr": lam3,
        },
    }
    converged = (
        residuals["weight_sum_residual"] <= 1e-6
        and residuals["min_weight"] >= -1e-9
        and residuals["length_excess"] <= 1e-6
        and diag["kdr_slack"] >= -slack_tol
    )
    return SolveReport(
        mu_star=mu_star,
        coupling=diag["coupling"],
        variance=diag["variance"],
        w2_squared=diag["w2_squared"],
        kdr_slack=diag["kdr_slack"],
        domain_residuals=residuals,
        iterations=it,
        converged=converged,
        seed=cfg.seed,
    )
