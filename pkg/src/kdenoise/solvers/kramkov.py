"""Comparison of two martingale couplings to the same four-atom data measure.

Hard-coded instance: a two-atom source with the diagonal-product-cost
optimal coupling, against a three-atom source whose coupling achieves a
strictly smaller quadratic cost.  Verifies (a) both couplings are
martingale, (b) the diagonal-cost optimality certificate holds on every
support pair of the first coupling, and (c) the quadratic costs are 4.5
vs 4.1, so the diagonal-cost optimizer is not the quadratic-cost optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..measures import DiscreteMeasure, variance
from ..transport import Coupling, coupling_cost

__all__ = ["KramkovComparison", "verify_kramkov_comparison", "comparison_measures"]


def comparison_measures():
    """The hard-coded (mu_k, mu_m, nu, pi_k, pi_m) instance."""
    nu = DiscreteMeasure(
        [[0.0, 0.0], [-3.0, 3.0], [2.0, 2.0], [-1.0, 5.0]], [0.25] * 4
    )
    mu_k = DiscreteMeasure([[-1.5, 1.5], [0.5, 3.5]], [0.5, 0.5])
    mu_m = DiscreteMeasure(
        [[-0.5, 0.5], [-0.5, 2.5], [-0.5, 4.5]], [0.3, 0.4, 0.3]
    )
    mass_k = np.array([
        # nu columns: (0,0), (-3,3), (2,2), (-1,5)
        [0.25, 0.25, 0.0, 0.0],
        [0.0, 0.0, 0.25, 0.25],
    ])
    mass_m = np.array([
        [0.25, 0.05, 0.0, 0.0],
        [0.0, 0.20, 0.20, 0.0],
        [0.0, 0.0, 0.05, 0.25],
    ])
    pi_k = Coupling(mass_k, mu_k, nu)
    pi_m = Coupling(mass_m, mu_m, nu)
    return mu_k, mu_m, nu, pi_k, pi_m


def _diag_cost(u, v) -> float:
    return (u[0] - v[0]) * (u[1] - v[1])


def _pair_inequality_holds(c0: float, c1: float, c01: float, tol: float = 1e-12) -> bool:
    """Whether (1-t) c0 + t c1 <= t (1-t) c01 for all t in [0, 1].

    q(t) = t(1-t) c01 - (1-t) c0 - t c1 is quadratic; it suffices to check
    the endpoints and, when q is concave-down-free (c01 < 0), the interior
    extremum.
    """
    if c0 > tol or c1 > tol:  # q(0) = -c0, q(1) = -c1
        return False
    if c01 < 0:
        # q(t) = -c01 t^2 + (c01 + c0 - c1) t - c0 is convex; check its minimum
        t_star = (c01 + c0 - c1) / (2.0 * c01)
        if 0.0 < t_star < 1.0:
            q = t_star * (1 - t_star) * c01 - (1 - t_star) * c0 - t_star * c1
            if q < -tol:
                return False
    return True


@dataclass(frozen=True)
class KramkovComparison:
    martingale_residual_k: float
    martingale_residual_m: float
    pair_inequality_holds: bool
    quadratic_cost_k: float
    quadratic_cost_m: float
    variance_gap_k: float  # Var(nu) - Var(mu_k), equals the cost under pi_k

    @property
    def passed(self) -> bool:
        return (
            self.martingale_residual_k <= 1e-12
            and self.martingale_residual_m <= 1e-12
            and self.pair_inequality_holds
            and self.quadratic_cost_m < self.quadratic_cost_k
        )


def verify_kramkov_comparison() -> KramkovComparison:
    mu_k, mu_m, nu, pi_k, pi_m = comparison_measures()
    support_pairs = [
        (x, y)
        for i, x in enumerate(mu_k.points)
        for j, y in enumerate(nu.points)
        if pi_k.mass[i, j] > 0
    ]
    ok = True
    for x0, y0 in support_pairs:
        for x1, y1 in support_pairs:
            c0 = _diag_cost(x0, y0)
            c1 = _diag_cost(x1, y1)
            c01 = _diag_cost(y0, y1)
            if not _pair_inequality_holds(c0, c1, c01):
                ok = False
    return KramkovComparison(
        martingale_residual_k=pi_k.martingale_residual(),
        martingale_residual_m=pi_m.martingale_residual(),
        pair_inequality_holds=ok,
        quadratic_cost_k=coupling_cost(pi_k),
        quadratic_cost_m=coupling_cost(pi_m),
        variance_gap_k=variance(nu) - variance(mu_k),
    )
