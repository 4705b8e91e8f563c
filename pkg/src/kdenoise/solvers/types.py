"""Domain descriptions, solver configuration, and the common report type."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..measures import DiscreteMeasure
from ..transport import Coupling, SinkhornConfig

__all__ = [
    "BoundedLength",
    "LengthSdRatio",
    "BoundedCurvature",
    "Subspace",
    "DiscreteSupport",
    "MonotonePenalty",
    "DomainSpec",
    "SolverConfig",
    "SolveReport",
    "SolverScaleError",
    "DomainError",
]


class DomainError(ValueError):
    """Invalid domain parameters."""


class SolverScaleError(RuntimeError):
    """Problem size exceeds what the exact-coupling solver is allowed to hold."""


@dataclass(frozen=True)
class BoundedLength:
    """Curves of at most m atoms with polyline length L(mu) <= B.

    Weights are free (and optimized) unless optimize_weights is False, in
    which case they stay uniform.
    """

    m: int
    B: float
    optimize_weights: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.B < 0:
            raise DomainError("B must be >= 0")


@dataclass(frozen=True)
class LengthSdRatio:
    """Uniform-weight curves with L(mu) / SD(mu) <= B (a cone)."""

    m: int
    B: float

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.B < 0:
            raise DomainError("B must be >= 0")


@dataclass(frozen=True)
class BoundedCurvature:
    """Uniform-weight curves with the total-curvature penalty multiplier.

    curvature_penalty == 0 is the degenerate zero-curvature domain (support
    collinear with the first principal direction); positive values penalize
    the summed squared half-angle cosines.
    """

    m: int
    curvature_penalty: float

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.curvature_penalty < 0:
            raise DomainError("curvature_penalty must be >= 0")


@dataclass(frozen=True)
class Subspace:
    """Measures supported on a linear subspace of the given dimension."""

    subspace_dim: int

    def __post_init__(self):
        if self.subspace_dim < 1:
            raise DomainError("subspace_dim must be >= 1")


@dataclass(frozen=True)
class DiscreteSupport:
    """Measures on at most m points; weights free, or fixed if given."""

    m: int
    fixed_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.fixed_weights is not None:
            w = np.asarray(self.fixed_weights, dtype=float)
            if w.shape != (self.m,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise DomainError("fixed_weights must be m nonnegative reals summing to 1")
            object.__setattr__(self, "fixed_weights", w)


@dataclass(frozen=True)
class MonotonePenalty:
    """Uniform-weight m-point measures with penalized monotone support (R^2).

    penalty_weight scales both the self-consistency (conditional-mean defect)
    penalty and the monotonicity-violation penalty; 0 turns both off and the
    solver degenerates to fixed-weight Lloyd iteration.
    """

    m: int
    penalty_weight: float

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.penalty_weight < 0:
            raise DomainError("penalty_weight must be >= 0")


DomainSpec = Union[
    BoundedLength, LengthSdRatio, BoundedCurvature, Subspace, DiscreteSupport,
    MonotonePenalty,
]


@dataclass(frozen=True)
class SolverConfig:
    """Iteration caps, step sizes, and tolerances shared by the solvers.

    multiplier_step_sizes maps multiplier names ("sum", "nonneg", "length",
    "kdr") to base step sizes; every multiplier starts at 0 and its step
    decays like 1/sqrt(t).  mixing is the partial-update factor for the
    curvature inner loop.
    """

    max_outer_iter: int = 20000
    step_size_x: float = 5e-2
    step_size_u: float = 1e-2
    multiplier_step_sizes: dict = field(
        default_factory=lambda: {"sum": 0.5, "nonneg": 1e-2, "length": 0.5, "kdr": 0.2}
    )
    sinkhorn: Optional[SinkhornConfig] = None
    mixing: float = 0.1
    convergence_tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")
        if self.step_size_x <= 0 or self.step_size_u <= 0:
            raise ValueError("step sizes must be positive")
        if not 0 < self.mixing <= 1:
            raise ValueError("mixing must be in (0, 1]")


@dataclass(frozen=True)
class SolveReport:
    """Solver output: the measure, its coupling to the data, and diagnostics.

    domain_residuals holds named residuals (length excess, curvature value,
    KKT residuals, ...); all scalar diagnostics are recomputed exactly on the
    delivered measure.  coupling is None when materializing it would be
    quadratic in a large sample size (subspace solver on big data).
    """

    mu_star: DiscreteMeasure
    coupling: Optional[Coupling]
    variance: float
    w2_squared: float
    kdr_slack: float
    domain_residuals: dict
    iterations: int
    converged: bool
    seed: int = 0
    extras: dict = field(default_factory=dict)
