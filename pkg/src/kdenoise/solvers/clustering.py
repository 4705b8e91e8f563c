"""Clustering-domain solvers.

``solve_discrete_support`` is Lloyd iteration: assign, recenter, repeat.
With free weights the assignment is nearest-center (classical k-means);
with fixed weights it is an exact transport solve.  Either way the recenter
step is the conditional barycentric map, so fixed points carry a martingale
coupling and solve the self-consistent problem, not just the relaxed one.

``solve_convex_order_penalty`` is the generalized Lloyd used for structured
domains at small scale: the coupling step minimizes transport cost plus a
quadratic penalty on the conditional-mean defect (a convex QP over the
transport polytope, solved by Frank-Wolfe with the exact-OT LP as oracle),
and the position step trades the recentering pull against a domain penalty
(monotone support or length excess).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..dominance import is_convex_order
from ..measures import DiscreteMeasure, barycenter, translate
from ..transport import Coupling, coupling_cost, exact_ot, squared_cost
from .common import exact_diagnostics, pc_line_init, polyline_length
from .types import (
    BoundedLength,
    MonotonePenalty,
    SolveReport,
    SolverConfig,
    SolverScaleError,
)

MAX_EXACT_COUPLING_CELLS = 60_000


def _nearest_assignment(centers: np.ndarray, nu: DiscreteMeasure) -> np.ndarray:
    """Hard nearest-center coupling; argmin breaks ties to the lowest index."""
    d2 = ((centers[:, None, :] - nu.points[None, :, :]) ** 2).sum(axis=2)
    a = np.argmin(d2, axis=0)
    mass = np.zeros((len(centers), nu.n_atoms))
    mass[a, np.arange(nu.n_atoms)] = nu.weights
    return mass


def _reseed_empty(centers: np.ndarray, mass: np.ndarray, nu: DiscreteMeasure) -> bool:
    """Move each empty cluster's center to the data atom farthest from its own
    assigned center.  Returns True if anything moved."""
    row_mass = mass.sum(axis=1)
    empty = np.flatnonzero(row_mass <= 0)
    if len(empty) == 0:
        return False
    assigned = np.argmax(mass > 0, axis=0)
    dist = np.linalg.norm(nu.points - centers[assigned], axis=1)
    order = np.argsort(dist)[::-1]
    for k, i in enumerate(empty):
        centers[i] = nu.points[order[k % len(order)]]
    return True


def solve_discrete_support(
    nu: DiscreteMeasure,
    m: int,
    fixed_weights: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
) -> SolveReport:
    """Lloyd fixed point over measures supported on at most m points.

    Free weights give classical k-means; fixed weights replace the
    assignment step with an exact transport solve.  The returned coupling is
    the recentered (martingale) coupling of the fixed point.
    """
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(cfg.seed)
    b = barycenter(nu)
    nu_c = translate(nu, -b)
    n = nu_c.n_atoms
    # seed centers on distinct data atoms where possible
    distinct = np.unique(nu_c.points, axis=0)
    if len(distinct) >= m:
        idx = rng.choice(len(distinct), size=m, replace=False)
        centers = distinct[np.sort(idx)].astype(float).copy()
    else:
        idx = rng.choice(n, size=m, replace=True)
        centers = nu_c.points[idx].astype(float) + 1e-9 * rng.normal(size=(m, nu_c.dim))
    if fixed_weights is not None:
        fixed_weights = np.asarray(fixed_weights, dtype=float)
        fixed_weights = fixed_weights / fixed_weights.sum()
    it = 0
    converged = False
    max_iter = min(cfg.max_outer_iter, 500)
    for it in range(1, max_iter + 1):
        if fixed_weights is None:
            mass = _nearest_assignment(centers, nu_c)
            if _reseed_empty(centers, mass, nu_c):
                mass = _nearest_assignment(centers, nu_c)
        else:
            src = DiscreteMeasure(centers, fixed_weights)
            mass = exact_ot(src, nu_c, squared_cost(src, nu_c)).coupling.mass
        row = mass.sum(axis=1)
        new_centers = centers.copy()
        pos = row > 0
        new_centers[pos] = (mass[pos] @ nu_c.points) / row[pos, None]
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift <= 1e-13:
            converged = True
            break
    weights = mass.sum(axis=1) if fixed_weights is None else fixed_weights
    keep = weights > 0
    mu_c = DiscreteMeasure(centers[keep], weights[keep] / weights[keep].sum())
    pi = Coupling(mass[keep] / weights[keep].sum(), mu_c, nu_c)
    mu_star = translate(mu_c, b)
    diag = exact_diagnostics(mu_star, nu)
    return SolveReport(
        mu_star=mu_star,
        coupling=Coupling(pi.mass, mu_star, nu),
        variance=diag["variance"],
        w2_squared=diag["w2_squared"],
        kdr_slack=diag["kdr_slack"],
        domain_residuals={
            "martingale_residual": pi.martingale_residual(),
            "transport_cost": coupling_cost(pi),
        },
        iterations=it,
        converged=converged,
        seed=cfg.seed,
    )


# ------------------------------------------------------------------------
# Generalized Lloyd with penalties
# ------------------------------------------------------------------------


def _fw_penalized_coupling(
    x: np.ndarray,
    mu_w: np.ndarray,
    nu: DiscreteMeasure,
    kappa: float,
    lam_mult: Optional[np.ndarray],
    start: Optional[np.ndarray],
    max_iter: int = 80,
    gap_tol: float = 1e-12,
) -> np.ndarray:
    """Coupling step: minimize, over the transport polytope,

        <C, pi> + sum_i <Lam_i, d_i(pi)> + kappa * sum_i |d_i(pi)|^2,

    where d_i = sum_j pi_ij (y_j - x_i) is the unnormalized conditional-mean
    defect and Lam are its running multipliers.  Frank-Wolfe with the exact-OT
    LP as vertex oracle and exact line search (the objective is quadratic)."""
    src = DiscreteMeasure(x, mu_w)
    C = squared_cost(src, nu)
    if kappa == 0.0:
        return exact_ot(src, nu, C).coupling.mass
    Y = nu.points
    if lam_mult is not None:
        C = C + lam_mult @ Y.T - np.einsum("ik,ik->i", lam_mult, x)[:, None]
    pi = start if start is not None else np.outer(mu_w, nu.weights)
    for _ in range(max_iter):
        defect = pi @ Y - pi.sum(axis=1)[:, None] * x  # = sum_j pi_ij (y_j - x_i)
        grad = C + 2.0 * kappa * (defect @ Y.T) \
            - 2.0 * kappa * np.einsum("ik,ik->i", defect, x)[:, None]
        vertex = exact_ot(src, nu, grad).coupling.mass
        delta = vertex - pi
        gap = -float((grad * delta).sum())
        if gap <= gap_tol:
            break
        ddef = delta @ Y - delta.sum(axis=1)[:, None] * x
        curv = float(kappa * (ddef**2).sum())
        lin = float((grad * delta).sum())
        step = 1.0 if curv <= 0 else min(1.0, max(0.0, -lin / (2.0 * curv)))
        if step <= 0:
            break
        pi = pi + step * delta
    return pi


def _x_step(x, cbar, pull, mu_w, kappa, lam_mult, pen, domain):
    """Position update: minimize the transport + multiplier + quadratic-defect
    terms plus the domain penalty (smooth except the squared hinges)."""
    from scipy.optimize import minimize

    a = 2.0 * mu_w + 2.0 * kappa * mu_w**2          # quadratic coefficients
    b_lin = (2.0 + 2.0 * kappa * mu_w)[:, None] * pull + mu_w[:, None] * lam_mult

    def val_grad(z):
        xz = z.reshape(x.shape)
        quad = 0.5 * float((a[:, None] * xz**2).sum()) - float((b_lin * xz).sum())
        vV, gV = _domain_penalty_value_grad(xz, domain)
        grad = a[:, None] * xz - b_lin + pen * gV
        return quad + pen * vV, grad.ravel()

    x0 = b_lin / a[:, None]  # closed form when the domain penalty is off
    res = minimize(val_grad, x0.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": 500, "ftol": 1e-18, "gtol": 1e-12})
    out = res.x.reshape(x.shape)
    return out if np.all(np.isfinite(out)) else x0


def _isotonic_l2(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted L2 isotonic regression (pool adjacent violators)."""
    n = len(y)
    level_y = list(y.astype(float))
    level_w = list(w.astype(float))
    count = [1] * n
    i = 0
    while i < len(level_y) - 1:
        if level_y[i] > level_y[i + 1] + 0.0:
            tw = level_w[i] + level_w[i + 1]
            ty = (level_w[i] * level_y[i] + level_w[i + 1] * level_y[i + 1]) / tw
            level_y[i] = ty
            level_w[i] = tw
            count[i] += count[i + 1]
            del level_y[i + 1], level_w[i + 1], count[i + 1]
            if i > 0:
                i -= 1
        else:
            i += 1
    out = np.empty(n)
    pos = 0
    for yv, c in zip(level_y, count):
        out[pos:pos + c] = yv
        pos += c
    return out


def _project_monotone(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Snap a near-monotone planar support onto an exactly monotone one.

    Monotone supports are comonotone in coordinates, so it suffices to sort
    by the first coordinate and isotonically regress the second."""
    order = np.argsort(x[:, 0], kind="stable")
    out = x.copy()
    out[order, 1] = _isotonic_l2(x[order, 1], w[order])
    return out


def _domain_penalty_value_grad(x: np.ndarray, domain) -> tuple[float, np.ndarray]:
    """Squared-hinge structure penalty and its gradient."""
    g = np.zeros_like(x)
    if isinstance(domain, MonotonePenalty):
        d1 = x[:, None, 0] - x[None, :, 0]
        d2 = x[:, None, 1] - x[None, :, 1]
        prod = d1 * d2
        viol = np.minimum(prod, 0.0)
        val = float((viol**2).sum()) / 2.0  # each pair counted twice
        w = 2.0 * viol
        g[:, 0] = (w * d2).sum(axis=1)
        g[:, 1] = (w * d1).sum(axis=1)
        return val, g
    if isinstance(domain, BoundedLength):
        L = polyline_length(x)
        excess = max(0.0, L - domain.B)
        if excess > 0 and len(x) > 1:
            seg = np.diff(x, axis=0)
            norms = np.maximum(np.linalg.norm(seg, axis=1), 1e-9)
            unit = seg / norms[:, None]
            gl = np.zeros_like(x)
            gl[1:] += unit
            gl[:-1] -= unit
            g = 2.0 * excess * gl
        return excess**2, g
    raise TypeError(f"unsupported domain for the penalty solver: {domain!r}")


def solve_convex_order_penalty(
    nu: DiscreteMeasure,
    domain,
    cfg: Optional[SolverConfig] = None,
    penalty_weight: Optional[float] = None,
) -> SolveReport:
    """Generalized Lloyd for the self-consistent problem on penalized domains.

    Weights are fixed at 1/m.  Each sweep solves the penalized coupling QP,
    then updates positions against the recentering pull plus the domain
    penalty.  penalty_weight defaults to the domain's own weight
    (MonotonePenalty) or 1.0 (BoundedLength); the same knob scales the
    self-consistency and domain penalties, so 0 reproduces fixed-weight
    Lloyd exactly.

    Scale guard: the exact coupling array is limited to ~20 x 2000 cells;
    beyond that a SolverScaleError is raised instead of thrashing memory.
    """
    cfg = cfg or SolverConfig()
    m = domain.m
    n = nu.n_atoms
    if m * n > MAX_EXACT_COUPLING_CELLS:
        raise SolverScaleError(
            f"exact coupling of size {m}x{n} exceeds the supported scale "
            f"({MAX_EXACT_COUPLING_CELLS} cells); use a KDR solver instead"
        )
    if penalty_weight is None:
        penalty_weight = getattr(domain, "penalty_weight", 1.0)
    pen = float(penalty_weight)
    b = barycenter(nu)
    nu_c = translate(nu, -b)
    mu_w = np.full(m, 1.0 / m)
    kappa = pen * m  # kappa * |row defect|^2 == pen * u_i |c_pi(x_i) - x_i|^2
    # running multipliers on the defect rows: a quadratic penalty alone only
    # reaches zero defect as pen -> inf, the multipliers get there at finite pen
    lam_mult = np.zeros((m, nu.dim)) if pen > 0 else None
    # fixed-weight Lloyd start on the first principal component
    x = pc_line_init(nu_c, m)
    pi = None
    it = 0
    converged = False
    max_outer = min(cfg.max_outer_iter, 300)
    for it in range(1, max_outer + 1):
        pi = _fw_penalized_coupling(x, mu_w, nu_c, kappa, lam_mult, pi)
        row = pi.sum(axis=1)
        pull = pi @ nu_c.points  # p_i = sum_j pi_ij y_j
        cbar = np.where(row[:, None] > 0, pull / np.maximum(row, 1e-300)[:, None], x)
        if pen == 0.0:
            x_new = cbar
        else:
            x_new = _x_step(x, cbar, pull, mu_w, kappa, lam_mult, pen, domain)
            if isinstance(domain, MonotonePenalty):
                # keep the iterate exactly feasible; the penalized optimum
                # approaches the monotone boundary from outside otherwise
                x_new = _project_monotone(x_new, mu_w)
            elif isinstance(domain, BoundedLength):
                L = polyline_length(x_new)
                if L > domain.B > 0:
                    xb = mu_w @ x_new
                    x_new = xb + (domain.B / L) * (x_new - xb)
        defect = pull - mu_w[:, None] * x_new
        shift = np.abs(x_new - x).max()
        x = x_new
        if pen > 0.0:
            lam_mult = lam_mult + 2.0 * kappa * defect
        if shift <= cfg.convergence_tol and float(np.abs(defect).max()) <= 1e-9:
            converged = True
            break
        if pen == 0.0 and shift <= cfg.convergence_tol:
            converged = True
            break
    src_c = DiscreteMeasure(x, mu_w)
    pi = _fw_penalized_coupling(x, mu_w, nu_c, kappa, lam_mult, pi)
    coupling_c = Coupling(pi, src_c, nu_c)
    mu_star = translate(src_c, b)
    diag = exact_diagnostics(mu_star, nu)
    domain_val, _ = _domain_penalty_value_grad(x, domain)
    verdict = is_convex_order(mu_star, nu)
    return SolveReport(
        mu_star=mu_star,
        coupling=Coupling(pi, mu_star, nu),
        variance=diag["variance"],
        w2_squared=diag["w2_squared"],
        kdr_slack=diag["kdr_slack"],
        domain_residuals={
            "martingale_residual": coupling_c.martingale_residual(),
            "domain_penalty": float(domain_val),
            "transport_cost": coupling_cost(coupling_c),
        },
        iterations=it,
        converged=converged,
        seed=cfg.seed,
        extras={"convex_order_dominated": verdict.dominated,
                "convex_order_residual": verdict.max_residual},
    )
