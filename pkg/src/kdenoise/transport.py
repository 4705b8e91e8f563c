"""Exact and entropic optimal transport between discrete measures.

The exact kernel solves the transport LP with HiGHS (dual simplex, so the
returned plan is a vertex of the coupling polytope); it is meant for oracle
duty and desk-scale instances (m, n up to ~2000).  Larger problems go through
the log-domain Sinkhorn solver, whose output plan is always rounded back to
exact marginals so that Coupling invariants hold regardless of convergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .measures import DiscreteMeasure

__all__ = [
    "Coupling",
    "SinkhornConfig",
    "TransportResult",
    "TransportError",
    "squared_cost",
    "inner_product_cost",
    "coupling_cost",
    "exact_ot",
    "w2_squared",
    "max_correlation",
    "sinkhorn",
]

MARGINAL_TOL = 1e-8
NEG_MASS_TOL = -1e-14

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-9,
}


class TransportError(ValueError):
    """Raised on malformed transport inputs (dimension or shape mismatch)."""


@dataclass(frozen=True)
class Coupling:
    """Nonnegative (m, n) mass matrix with marginals ``source`` and ``target``."""

    mass: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        m, n = self.source.n_atoms, self.target.n_atoms
        if mass.shape != (m, n):
            raise TransportError(f"mass shape {mass.shape}, expected ({m}, {n})")
        if mass.min(initial=0.0) < NEG_MASS_TOL:
            raise TransportError(f"coupling mass has entry {mass.min():.3e} < {NEG_MASS_TOL}")
        mass = np.clip(mass, 0.0, None)
        row_err = np.abs(mass.sum(axis=1) - self.source.weights).max()
        col_err = np.abs(mass.sum(axis=0) - self.target.weights).max()
        if row_err > MARGINAL_TOL or col_err > MARGINAL_TOL:
            raise TransportError(
                f"marginal violation: rows {row_err:.3e}, cols {col_err:.3e} "
                f"(tolerance {MARGINAL_TOL})"
            )
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    def conditional_means(self) -> np.ndarray:
        """Barycenter of the target conditioned on each source atom.

        Rows with zero marginal get their own source atom back (harmless
        placeholder; callers that care drop those rows first).
        """
        u = self.mass.sum(axis=1)
        out = self.source.points.copy()
        pos = u > 0
        out[pos] = (self.mass[pos] @ self.target.points) / u[pos, None]
        return out

    def martingale_residual(self) -> float:
        """Sup-norm of the conditional-mean defect c_pi(x_i) - x_i."""
        defect = self.conditional_means() - self.source.points
        return float(np.abs(defect).max())


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic-solver knobs.

    epsilon is in cost units.  marginal_tol is the L1 marginal-violation
    threshold used to stop the iteration (checked on the unrounded plan); the
    returned plan is rounded to exact marginals either way.
    """

    epsilon: float = 1e-2
    max_iter: int = 10000
    marginal_tol: float = 1e-6
    use_epsilon_scaling: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.marginal_tol > 0:
            raise ValueError("marginal_tol must be > 0")


@dataclass(frozen=True)
class TransportResult:
    value: float
    coupling: Coupling
    method: str  # "exact" | "entropic"
    iterations: int
    converged: bool = True
    marginal_error: float = 0.0
    potentials: Optional[tuple] = None  # entropic duals (f, g), full size


def squared_cost(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """|x_i - y_j|^2 cost matrix."""
    if mu.dim != nu.dim:
        raise TransportError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def inner_product_cost(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """<x_i, y_j> matrix (a payoff, not a cost)."""
    if mu.dim != nu.dim:
        raise TransportError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    return mu.points @ nu.points.T


def coupling_cost(pi: Coupling, cost: Optional[np.ndarray] = None) -> float:
    """<cost, pi>; defaults to the squared-distance cost."""
    if cost is None:
        cost = squared_cost(pi.source, pi.target)
    return float(np.sum(cost * pi.mass))


def _marginal_matrix(m: int, n: int) -> sparse.csr_matrix:
    k = np.arange(m * n)
    rows = np.concatenate([k // n, m + (k % n)])
    cols = np.concatenate([k, k])
    return sparse.csr_matrix((np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n))


def _solve_transport_lp(u: np.ndarray, v: np.ndarray, cost: np.ndarray):
    """Exact transport LP; returns (value, plan, simplex iterations)."""
    m, n = cost.shape
    res = linprog(
        cost.ravel(),
        A_eq=_marginal_matrix(m, n),
        b_eq=np.concatenate([u, v]),
        bounds=(0, None),
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        # Product coupling is always feasible, so this is a solver fault.
        raise RuntimeError(f"transport LP failed: status={res.status} {res.message}")
    return float(res.fun), res.x.reshape(m, n), int(res.nit)


def exact_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: np.ndarray) -> TransportResult:
    """Minimize <cost, pi> over couplings of (mu, nu), exactly.

    Zero-weight atoms are stripped before the solve and reinserted as zero
    rows/columns so the returned plan matches the input shapes.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (mu.n_atoms, nu.n_atoms):
        raise TransportError(
            f"cost shape {cost.shape}, expected ({mu.n_atoms}, {nu.n_atoms})"
        )
    if not np.all(np.isfinite(cost)):
        raise TransportError("cost matrix has non-finite entries")
    ri = np.flatnonzero(mu.weights > 0)
    cj = np.flatnonzero(nu.weights > 0)
    value, sub, nit = _solve_transport_lp(
        mu.weights[ri], nu.weights[cj], cost[np.ix_(ri, cj)]
    )
    plan = np.zeros((mu.n_atoms, nu.n_atoms))
    plan[np.ix_(ri, cj)] = sub
    return TransportResult(
        value=value,
        coupling=Coupling(plan, mu, nu),
        method="exact",
        iterations=nit,
    )


def w2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportResult:
    """Squared 2-Wasserstein distance (exact LP with |x - y|^2 cost)."""
    return exact_ot(mu, nu, squared_cost(mu, nu))


def max_correlation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportResult:
    """Maximize the coupling correlation sup_pi int <x, y> d pi.

    Solved as exact OT with cost -<x_i, y_j>; the reported value is negated
    back, so it is the maximal correlation itself.
    """
    res = exact_ot(mu, nu, -inner_product_cost(mu, nu))
    return TransportResult(
        value=-res.value,
        coupling=res.coupling,
        method="exact",
        iterations=res.iterations,
    )


# --------------------------------------------------------------------------
# Entropic solver
# --------------------------------------------------------------------------


def _lse_rows(A: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp; A is scratch and gets overwritten."""
    mx = A.max(axis=1)
    np.subtract(A, mx[:, None], out=A)
    np.exp(A, out=A)
    s = A.sum(axis=1)
    np.log(s, out=s)
    np.add(s, mx, out=out)
    return out


def _sinkhorn_stage(u, v, cost, eps, f, g, max_iter, tol, check_every=20):
    """Log-domain Sinkhorn at one epsilon; returns (f, g, iterations, L1 err)."""
    m, n = cost.shape
    logu = np.log(u)[:, None]
    logv = np.log(v)[None, :]
    B_f = -cost / eps + logv          # row-update kernel
    B_g = (-cost / eps).T + logu.T    # column-update kernel, stored (n, m)
    W = np.empty((m, n))
    WT = np.empty((n, m))
    tf = np.empty(m)
    tg = np.empty(n)
    it, err = 0, np.inf
    for it in range(1, max_iter + 1):
        np.add(B_f, (g / eps)[None, :], out=W)
        f = -eps * _lse_rows(W, tf)
        np.add(B_g, (f / eps)[None, :], out=WT)
        g = -eps * _lse_rows(WT, tg)
        if it % check_every == 0 or it == max_iter:
            plan = np.exp((f[:, None] + g[None, :] - cost) / eps + logu + logv)
            err = np.abs(plan.sum(axis=1) - u).sum() + np.abs(plan.sum(axis=0) - v).sum()
            if err < tol:
                break
    return f.copy(), g.copy(), it, err


def _round_to_marginals(plan, u, v):
    """Rescale rows/columns below target and add a rank-one residual.

    Standard rounding: the output has exact marginals and stays nonnegative.
    """
    r = plan.sum(axis=1)
    plan = plan * np.minimum(u / np.where(r > 0, r, 1.0), 1.0)[:, None]
    c = plan.sum(axis=0)
    plan = plan * np.minimum(v / np.where(c > 0, c, 1.0), 1.0)[None, :]
    du = u - plan.sum(axis=1)
    dv = v - plan.sum(axis=0)
    s = du.sum()
    if s > 1e-300:
        plan = plan + np.outer(du, dv) / s
    return plan


def sinkhorn(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cost: np.ndarray,
    cfg: SinkhornConfig,
    warm_start: Optional[tuple] = None,
) -> TransportResult:
    """Entropically regularized OT in the log domain.

    With ``use_epsilon_scaling`` the regularization starts near mean(cost) and
    halves per stage down to cfg.epsilon, warm-starting the potentials.  The
    reported value is <cost, plan> of the plan rounded to exact marginals.
    Non-convergence (unrounded L1 marginal error above marginal_tol at the
    iteration cap) flags the result; it never raises.

    warm_start, if given, is a (f, g) pair of dual potentials to start from
    (used by solvers that call sinkhorn repeatedly on a slowly moving cost).
    """
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (mu.n_atoms, nu.n_atoms):
        raise TransportError(
            f"cost shape {cost.shape}, expected ({mu.n_atoms}, {nu.n_atoms})"
        )
    ri = np.flatnonzero(mu.weights > 0)
    cj = np.flatnonzero(nu.weights > 0)
    u, v = mu.weights[ri], nu.weights[cj]
    C = cost[np.ix_(ri, cj)]
    if warm_start is not None:
        f, g = warm_start[0][ri].copy(), warm_start[1][cj].copy()
        stages = [cfg.epsilon]
    else:
        f = np.zeros(len(ri))
        g = np.zeros(len(cj))
        if cfg.use_epsilon_scaling:
            stages = []
            e = max(abs(C).mean(), cfg.epsilon)
            while e > cfg.epsilon * (1 + 1e-9):
                stages.append(e)
                e *= 0.5
            stages.append(cfg.epsilon)
        else:
            stages = [cfg.epsilon]
    total_it = 0
    err = np.inf
    for e in stages:
        last = e == stages[-1]
        f, g, it, err = _sinkhorn_stage(
            u, v, C, e, f, g,
            cfg.max_iter if last else min(cfg.max_iter, 200),
            cfg.marginal_tol if last else max(cfg.marginal_tol, 1e-3),
        )
        total_it += it
    lp = (f[:, None] + g[None, :] - C) / cfg.epsilon
    plan = np.exp(lp + np.log(u)[:, None] + np.log(v)[None, :])
    plan = _round_to_marginals(plan, u, v)
    full = np.zeros((mu.n_atoms, nu.n_atoms))
    full[np.ix_(ri, cj)] = plan
    coupling = Coupling(full, mu, nu)
    f_full = np.zeros(mu.n_atoms)
    g_full = np.zeros(nu.n_atoms)
    f_full[ri] = f
    g_full[cj] = g
    return TransportResult(
        value=float(np.sum(cost * full)),
        coupling=coupling,
        method="entropic",
        iterations=total_it,
        converged=bool(err <= cfg.marginal_tol),
        marginal_error=float(err),
        potentials=(f_full, g_full),
    )
