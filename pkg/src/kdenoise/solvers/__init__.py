"""Variance-maximization solvers over structured domains."""

from __future__ import annotations

from typing import Optional

from ..measures import DiscreteMeasure, barycenter, dirac, variance
from ..transport import Coupling
from .bounded_length import solve_bounded_length
from .clustering import solve_convex_order_penalty, solve_discrete_support
from .cone import solve_cone_alternating, step2_curvature, step2_ratio
from .kramkov import KramkovComparison, comparison_measures, verify_kramkov_comparison
from .subspace import solve_subspace
from .types import (
    BoundedCurvature,
    BoundedLength,
    DiscreteSupport,
    DomainError,
    DomainSpec,
    LengthSdRatio,
    MonotonePenalty,
    SolveReport,
    SolverConfig,
    SolverScaleError,
    Subspace,
)

__all__ = [
    "BoundedCurvature",
    "BoundedLength",
    "DiscreteSupport",
    "DomainError",
    "DomainSpec",
    "KramkovComparison",
    "LengthSdRatio",
    "MonotonePenalty",
    "SolveReport",
    "SolverConfig",
    "SolverScaleError",
    "Subspace",
    "comparison_measures",
    "solve_bounded_length",
    "solve_cone_alternating",
    "solve_convex_order_penalty",
    "solve_discrete_support",
    "solve_kdr",
    "solve_subspace",
    "step2_curvature",
    "step2_ratio",
    "verify_kramkov_comparison",
]


def solve_kdr(
    nu: DiscreteMeasure, domain: DomainSpec, cfg: Optional[SolverConfig] = None
) -> SolveReport:
    """Dispatch the dominance-constrained variance maximization by domain.

    Every solver centers the data internally and translates its output back,
    so callers can pass raw (uncentered) measures.
    """
    cfg = cfg or SolverConfig()
    if isinstance(domain, BoundedLength):
        if domain.B == 0:
            # all atoms coincide, and the only dominated point mass is the
            # barycenter itself
            mu = dirac(barycenter(nu))
            return SolveReport(
                mu_star=mu,
                coupling=Coupling(nu.weights[None, :].copy(), mu, nu),
                variance=0.0,
                w2_squared=variance(nu),
                kdr_slack=0.0,
                domain_residuals={"length": 0.0, "length_excess": -0.0},
                iterations=0,
                converged=True,
                seed=cfg.seed,
            )
        return solve_bounded_length(nu, domain.m, domain.B, cfg)
    if isinstance(domain, (LengthSdRatio, BoundedCurvature)):
        return solve_cone_alternating(nu, domain, cfg)
    if isinstance(domain, Subspace):
        return solve_subspace(nu, domain.subspace_dim, seed=cfg.seed)
    if isinstance(domain, DiscreteSupport):
        return solve_discrete_support(nu, domain.m, domain.fixed_weights, cfg)
    if isinstance(domain, MonotonePenalty):
        return solve_convex_order_penalty(nu, domain, cfg)
    raise TypeError(f"unknown domain spec: {domain!r}")
