"""Alternating solver for cone domains (length/SD ratio, bounded curvature).

The scale-invariant problem is normalized: maximize the coupling correlation
with the second moment capped, alternating

  Step 1 - entropic OT with fixed marginals for the coupling (cost -<x, y>),
  Step 2 - a linear maximization over positions under the cap,

and finally rescaling positions so the correlation equals the second moment
(the dominance equality), using one exact LP for the rescale so the reported
identities hold to LP precision.

Step 2 for the ratio domain is a small nonsmooth program solved by augmented
Lagrangian iterations (L-BFGS inner solves) with explicit KKT residuals; for
the curvature domain it is the closed-form stationarity solution of the
linearized penalty with safeguarded partial updates, followed by an
augmented-Lagrangian polish that certifies first-order residuals at the
delivered point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ..measures import DiscreteMeasure, barycenter, translate, uniform_measure, variance
from ..transport import SinkhornConfig, max_correlation, sinkhorn
from .common import (
    curvature_value,
    exact_diagnostics,
    pc_line_init,
    polyline_length,
    principal_directions,
)
from .types import BoundedCurvature, LengthSdRatio, SolveReport, SolverConfig

SEGMENT_FLOOR = 1e-9


# ------------------------------------------------------------------ Step 2a


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    feasibility: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


def _length_and_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
    """Polyline length with norms smoothed at the segment floor.

    sqrt(|s|^2 + floor^2) keeps the objective differentiable through
    degenerate segments (which do occur at optima for tight bounds); the
    induced length error is below m * floor, far under reporting tolerances.
    """
    seg = np.diff(x, axis=0)
    norms = np.sqrt((seg**2).sum(axis=1) + SEGMENT_FLOOR**2)
    unit = seg / norms[:, None]
    grad = np.zeros_like(x)
    grad[1:] += unit
    grad[:-1] -= unit
    return float(norms.sum()), grad


def step2_ratio(
    y_bar: np.ndarray,
    B: float,
    x0: Optional[np.ndarray] = None,
    kkt_tol: float = 1e-6,
    max_outer: int = 80,
    warm_multipliers: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, KktResiduals, tuple[float, float]]:
    """Maximize sum <x_i, ybar_i> s.t. sum x_i = 0, sum |x_i|^2 <= 1,
    sum ||x_{i+1} - x_i|| <= B.

    Centering is enforced by construction (positions are parametrized up to
    their mean); the two inequalities are handled by augmented-Lagrangian
    multipliers with L-BFGS inner minimizations and an adaptive penalty.
    Returns the point, its KKT residuals (stationarity measured on the
    centered subspace with the smoothed length gradient), and the final
    multipliers for warm starts.
    """
    y_bar = np.asarray(y_bar, dtype=float)
    m, d = y_bar.shape
    if float(np.abs(y_bar).max(initial=0.0)) == 0.0:
        return np.zeros((m, d)), KktResiduals(0.0, 0.0, 0.0), (0.0, 0.0)
    yc = y_bar - y_bar.mean(axis=0)

    def split(z):
        x = z.reshape(m, d)
        return x - x.mean(axis=0)

    mu1, mu2 = warm_multipliers if warm_multipliers is not None else (0.0, 0.0)
    rho = 10.0
    if x0 is None:
        x = yc / max(np.linalg.norm(yc), 1e-12)
    else:
        x = np.asarray(x0, dtype=float).copy()
        x -= x.mean(axis=0)
    z = x.ravel().copy()

    def al_value_grad(zv):
        x = split(zv)
        g1 = float((x**2).sum() - 1.0)
        L, gL = _length_and_grad(x)
        g2 = L - B
        t1 = max(0.0, mu1 + rho * g1)
        t2 = max(0.0, mu2 + rho * g2)
        val = -float((x * yc).sum()) + (t1**2 - mu1**2 + t2**2 - mu2**2) / (2 * rho)
        grad = -yc + t1 * 2.0 * x + t2 * gL
        grad -= grad.mean(axis=0)
        return val, grad.ravel()

    residuals = KktResiduals(np.inf, np.inf, np.inf)
    prev_viol = np.inf
    for _ in range(max_outer):
        res = minimize(
            al_value_grad, z, jac=True, method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-18, "gtol": 1e-14, "maxls": 100},
        )
        z = res.x
        x = split(z)
        g1 = float((x**2).sum() - 1.0)
        L, gL = _length_and_grad(x)
        g2 = L - B
        mu1 = max(0.0, mu1 + rho * g1)
        mu2 = max(0.0, mu2 + rho * g2)
        stat = -yc + mu1 * 2.0 * x + mu2 * gL
        stat -= stat.mean(axis=0)
        residuals = KktResiduals(
            stationarity=float(np.abs(stat).max()),
            feasibility=max(0.0, g1, g2),
            complementarity=max(abs(mu1 * g1), abs(mu2 * g2)),
        )
        if residuals.max <= kkt_tol:
            break
        viol = max(0.0, g1, g2)
        if viol > 0.3 * prev_viol:
            rho = min(rho * 2.0, 1e6)
        prev_viol = max(viol, 1e-300)
    return x, residuals, (mu1, mu2)


# ------------------------------------------------------------------ Step 2b


def curvature_gradient(x: np.ndarray, floor: float = SEGMENT_FLOOR) -> np.ndarray:
    """Gradient of the total curvature (1/4) sum |u_i - u_{i-1}|^2 in the
    atom positions, with segment norms smoothed at the floor."""
    m, d = x.shape
    grad = np.zeros_like(x)
    if m < 3:
        return grad
    seg = np.diff(x, axis=0)
    norms = np.sqrt((seg**2).sum(axis=1) + floor**2)
    u = seg / norms[:, None]
    e = u[1:] - u[:-1]
    g_a = np.zeros_like(seg)
    g_a[1:] += 0.5 * e
    g_a[:-1] -= 0.5 * e
    g_a = (g_a - (g_a * u).sum(axis=1)[:, None] * u) / norms[:, None]
    grad[1:] += g_a
    grad[:-1] -= g_a
    return grad


def step2_curvature(
    y_bar: np.ndarray,
    lam: float,
    x_prev: np.ndarray,
    eps_mix: float = 0.1,
    fixed_point_tol: float = 1e-8,
    max_inner: int = 5000,
    kkt_tol: float = 5e-7,
) -> tuple[np.ndarray, dict]:
    """Linearized-curvature-penalty maximization with closed-form updates.

    Each pass builds penalty coefficients from the previous point (the full
    curvature gradient: its middle-atom part is the -1/4 e_i (1/|a_i| +
    1/|a_{i-1}|) term, and the neighbor parts make the fixed point a true
    stationary point), maximizes sum <x_i, c_i> under sum x_i = 0,
    sum |x_i|^2 = m in closed form, and mixes the result into the iterate.
    A candidate step that lowers the penalized objective is rejected with
    the mixing halved — the raw coefficients are stiff for short segments
    and oscillate otherwise.  Stops at the fixed point (stationarity
    residual below kkt_tol or sup-change below fixed_point_tol).

    Degenerate all-equal coefficients (beta = 0) return x_prev with a flag.
    """
    y_bar = np.asarray(y_bar, dtype=float)
    m, d = y_bar.shape
    x = np.asarray(x_prev, dtype=float).copy()
    info = {"degenerate": False, "inner_iterations": 0, "fixed_point_gap": np.inf}

    def closed_form(xc):
        c = y_bar - lam * curvature_gradient(xc)
        alpha = c.mean(axis=0)
        centered = c - alpha
        beta = 0.5 * np.sqrt((centered**2).sum() / m)
        return centered, beta

    def objective(xc):
        return float((xc * y_bar).sum()) - lam * curvature_value(xc, SEGMENT_FLOOR)

    def renorm(xc):
        xc = xc - xc.mean(axis=0)
        return xc * np.sqrt(m) / max(np.linalg.norm(xc), 1e-300)

    centered, beta = closed_form(x)
    if beta <= 1e-300:
        info["degenerate"] = True
        info["inner_iterations"] = 1
        return x_prev.copy(), info
    if lam == 0.0:
        # penalty off: the closed form is the exact maximizer
        x_hat = centered / (2.0 * beta)
        info["inner_iterations"] = 1
        info["fixed_point_gap"] = 0.0
        info["kkt_stationarity"] = float(np.abs(centered - 2.0 * beta * x_hat).max())
        info["kkt_feasibility"] = max(
            float(np.abs(x_hat.sum(axis=0)).max()), abs(float((x_hat**2).sum()) - m)
        )
        info["kkt_complementarity"] = abs(beta * (float((x_hat**2).sum()) - m))
        return x_hat, info

    F = objective(x)
    mix = eps_mix
    it = 0
    kkt_stat = np.inf
    for it in range(1, max_inner + 1):
        centered, beta = closed_form(x)
        if beta <= 1e-300:
            info["degenerate"] = True
            info["inner_iterations"] = it
            return x_prev.copy(), info
        kkt_stat = float(np.abs(centered - 2.0 * beta * x).max())
        x_hat = centered / (2.0 * beta)
        gap = float(np.abs(x_hat - x).max())
        if kkt_stat <= kkt_tol or gap <= fixed_point_tol:
            break
        moved = False
        while mix > 1e-8:
            cand = renorm(mix * x_hat + (1.0 - mix) * x)
            F_cand = objective(cand)
            if F_cand >= F - 1e-14:
                x, F, moved = cand, F_cand, True
                mix = min(mix * 1.6, 1.0)
                break
            mix *= 0.5
        if not moved:
            break
    info["inner_iterations"] = it
    info["fixed_point_gap"] = float(np.abs(x_hat - x).max()) if m >= 1 else 0.0
    info["kkt_stationarity"] = kkt_stat
    info["kkt_feasibility"] = max(
        float(np.abs(x.sum(axis=0)).max()), abs(float((x**2).sum()) - m)
    )
    info["kkt_complementarity"] = abs(beta * (float((x**2).sum()) - m))
    return x, info


def _curvature_polish(
    y_bar: np.ndarray,
    lam: float,
    x0: np.ndarray,
    kkt_tol: float = 5e-7,
    max_outer: int = 40,
) -> tuple[np.ndarray, KktResiduals]:
    """Drive the curvature Step-2 point to small KKT residuals.

    The closed-form fixed-point iteration is slow near the optimum; this
    augmented-Lagrangian pass (ball multiplier, L-BFGS inner solves on the
    smoothed objective) certifies stationarity at the delivered point."""
    y_bar = np.asarray(y_bar, dtype=float)
    m, d = y_bar.shape
    yc = y_bar - y_bar.mean(axis=0)

    def split(z):
        x = z.reshape(m, d)
        return x - x.mean(axis=0)

    mu1 = 0.0
    rho = 10.0
    x = np.asarray(x0, dtype=float).copy()
    x -= x.mean(axis=0)
    z = x.ravel().copy()

    def grad_F(x):
        return yc - lam * curvature_gradient(x)

    def value_F(x):
        return float((x * yc).sum()) - lam * curvature_value(x, SEGMENT_FLOOR)

    def al_value_grad(zv):
        x = split(zv)
        g1 = float((x**2).sum() - m)
        t1 = max(0.0, mu1 + rho * g1)
        val = -value_F(x) + (t1**2 - mu1**2) / (2 * rho)
        grad = -grad_F(x) + t1 * 2.0 * x
        grad -= grad.mean(axis=0)
        return val, grad.ravel()

    residuals = KktResiduals(np.inf, np.inf, np.inf)
    for _ in range(max_outer):
        res = minimize(
            al_value_grad, z, jac=True, method="L-BFGS-B",
            options={"maxiter": 3000, "ftol": 1e-18, "gtol": 1e-14, "maxls": 100},
        )
        z = res.x
        x = split(z)
        g1 = float((x**2).sum() - m)
        mu1 = max(0.0, mu1 + rho * g1)
        stat = -grad_F(x) + mu1 * 2.0 * x
        stat -= stat.mean(axis=0)
        residuals = KktResiduals(
            stationarity=float(np.abs(stat).max()),
            feasibility=max(0.0, g1),
            complementarity=abs(mu1 * g1),
        )
        if residuals.max <= kkt_tol:
            break
        rho = min(rho * 2.0, 1e7)
    return x, residuals


# ------------------------------------------------------------- alternating


def _maxcorr_sinkhorn(x, nu_c, sk: SinkhornConfig, warm=None):
    """Entropic correlation-maximizing coupling; warm-starts dual potentials
    across the slowly moving outer iterates."""
    mu = uniform_measure(x)
    cost = -(x @ nu_c.points.T)
    res = sinkhorn(mu, nu_c, cost, sk, warm_start=warm)
    return res.coupling.mass, res.potentials


def _zero_curvature_solution(nu_c: DiscreteMeasure, m: int) -> np.ndarray:
    """Exact solution of the collinear (zero-curvature) cone: comonotone
    quantile means of the data projected on the first principal direction."""
    _, vecs = principal_directions(nu_c)
    e1 = vecs[:, 0]
    proj = nu_c.points @ e1
    order = np.argsort(proj)
    p = proj[order]
    w = nu_c.weights[order]
    t = np.zeros(m)
    quota = 1.0 / m
    i = 0
    acc_w = 0.0
    acc_pw = 0.0
    remaining = w.copy()
    for k in range(m):
        need = quota
        while need > 1e-15 and i < len(p):
            take = min(need, remaining[i])
            acc_w += take
            acc_pw += take * p[i]
            remaining[i] -= take
            need -= take
            if remaining[i] <= 1e-15:
                i += 1
        t[k] = acc_pw / acc_w if acc_w > 0 else 0.0
        acc_w = 0.0
        acc_pw = 0.0
    t -= t.mean()
    return t[:, None] * e1[None, :]


def solve_cone_alternating(
    nu: DiscreteMeasure, domain, cfg: Optional[SolverConfig] = None
) -> SolveReport:
    """KDR variance maximization on a cone domain by Step-1/Step-2 alternation.

    Weights are fixed at 1/m.  After the alternation converges, positions are
    normalized to unit variance and rescaled by the exact maximal correlation
    (one LP), which makes the correlation equal the second moment exactly;
    the scaling-duality factor pair (lambda_hat, lambda_check) is reported.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(domain, (LengthSdRatio, BoundedCurvature)):
        raise TypeError(f"not a cone domain: {domain!r}")
    m = domain.m
    b = barycenter(nu)
    nu_c = translate(nu, -b)
    if isinstance(domain, BoundedCurvature) and domain.curvature_penalty == 0.0:
        # degenerate zero-curvature cone: collinear with the first principal
        # direction (the subspace result), solved in closed form
        x = _zero_curvature_solution(nu_c, m)
        iterations, converged, shift = 1, True, 0.0
        kkt = KktResiduals(0.0, 0.0, 0.0)
        step2_info: dict = {"degenerate_domain": "zero-curvature"}
    else:
        if isinstance(domain, LengthSdRatio):
            # unit second-moment frame: SD = 1/sqrt(m), so the L/SD <= B
            # domain bound becomes a plain length cap B/sqrt(m)
            length_cap = domain.B / np.sqrt(m)
            x = pc_line_init(nu_c, m)
            norm = np.linalg.norm(x)
            x = x / max(norm, 1e-12)
            L0, _ = _length_and_grad(x)
            if L0 > length_cap:
                x *= 0.99 * length_cap / L0
        else:
            x = pc_line_init(nu_c, m)
            x -= x.mean(axis=0)
            x *= np.sqrt(m) / max(np.linalg.norm(x), 1e-12)
        kkt = KktResiduals(np.inf, np.inf, np.inf)
        step2_info = {}
        converged = False
        iterations = 0
        max_outer = min(cfg.max_outer_iter, 150)
        warm_mult = None
        cost0 = np.abs(x @ nu_c.points.T)
        sk = cfg.sinkhorn or SinkhornConfig(
            epsilon=max(1e-2 * float(cost0.mean()), 1e-12), max_iter=300
        )
        duals = None
        for iterations in range(1, max_outer + 1):
            pi, duals = _maxcorr_sinkhorn(x, nu_c, sk, warm=duals)
            y_bar = pi @ nu_c.points
            if isinstance(domain, LengthSdRatio):
                x_new, kkt, warm_mult = step2_ratio(
                    y_bar, length_cap, x0=x, kkt_tol=1e-4,
                    warm_multipliers=warm_mult, max_outer=15,
                )
            else:
                x_new, step2_info = step2_curvature(
                    y_bar, domain.curvature_penalty, x, eps_mix=cfg.mixing,
                    max_inner=400, kkt_tol=1e-4,
                )
            shift = float(np.abs(x_new - x).max())
            x = x_new
            # the coupling step is entropic, so the joint fixed point carries
            # a small noise floor; first-order optimality is certified by the
            # tight pass below
            if shift <= max(cfg.convergence_tol, 1e-4):
                break
        # tight final pass: convergence means certified stationarity of the
        # delivered point, not just a stalled drift
        pi, duals = _maxcorr_sinkhorn(x, nu_c, sk, warm=duals)
        if isinstance(domain, LengthSdRatio):
            x, kkt, warm_mult = step2_ratio(
                pi @ nu_c.points, length_cap, x0=x, kkt_tol=5e-7,
                warm_multipliers=warm_mult,
            )
        else:
            x, kkt = _curvature_polish(
                pi @ nu_c.points, domain.curvature_penalty, x, kkt_tol=5e-7
            )
        converged = kkt.max <= 1e-6
    # exact rescale: normalize to unit variance, then scale by the maximal
    # correlation so that corr = second moment (the dominance equality)
    x = x - x.mean(axis=0)
    sd = np.sqrt((x**2).sum() / m)
    x_tilde = x / max(sd, 1e-300)
    mu_tilde = uniform_measure(x_tilde)
    corr = max_correlation(mu_tilde, nu_c)
    lam_hat = corr.value  # second moment of mu_tilde is exactly 1
    x_star = lam_hat * x_tilde
    mu_star_c = uniform_measure(x_star)
    mu_star = translate(mu_star_c, b)
    diag = exact_diagnostics(mu_star, nu)
    lam_check = 1.0 / np.sqrt(max(variance(mu_star), 1e-300))
    residuals = {
        "kkt_stationarity": kkt.stationarity,
        "kkt_feasibility": kkt.feasibility,
        "kkt_complementarity": kkt.complementarity,
        "sum_x": float(np.abs(x_star.sum(axis=0)).max()),
        "length": polyline_length(x_star),
        "curvature": curvature_value(x_star),
        "cone_identity_gap": abs(
            diag["variance"] + diag["w2_squared"] - variance(nu)
        ),
        "alternation_shift": float(shift) if iterations else 0.0,
    }
    if isinstance(domain, LengthSdRatio):
        sd_star = np.sqrt(variance(mu_star))
        residuals["ratio"] = residuals["length"] / max(sd_star, 1e-300)
        residuals["ratio_excess"] = residuals["ratio"] - domain.B
    return SolveReport(
        mu_star=mu_star,
        # the squared-cost-optimal plan is also the correlation maximizer
        coupling=diag["coupling"],
        variance=diag["variance"],
        w2_squared=diag["w2_squared"],
        kdr_slack=diag["kdr_slack"],
        domain_residuals=residuals,
        iterations=iterations,
        converged=converged,
        seed=cfg.seed,
        extras={
            "lambda_hat": float(lam_hat),
            "lambda_check": float(lam_check),
            "step2_info": step2_info,
        },
    )
