"""Synthetic dataset generators, all deterministic given the spec's seed.

The kernel-split family is exact: for index n the three signal atoms each
split into two offsets at angle theta_n = pi (1 - 1/(2(n+1))); the limiting
measure collapses onto five integer points on the axis with rational
weights.  The parabola and step-curve clouds follow the documented defaults
(the source text gives no noise level for them; sigma is configurable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..measures import DiscreteMeasure, load_measure_csv, uniform_measure

__all__ = [
    "Parabola",
    "StepCurve",
    "InstabilityKernel",
    "FactorModel",
    "FromCsv",
    "DatasetSpec",
    "generate",
    "instability_signal",
]


@dataclass(frozen=True)
class Parabola:
    """Y = (Z, Z^2) + noise with Z uniform on [-1, 1]."""

    n: int
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class StepCurve:
    """Three axis-aligned segments forming a step, sampled arc-length
    uniformly, plus isotropic Gaussian noise.

    The step runs (0,0) -> (1,0) -> (1,1) -> (2,1).
    """

    n: int = 300
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class InstabilityKernel:
    """The kernel-split family: index None means the five-atom limit."""

    n_index: Optional[int] = None  # None = the limit measure

    def __post_init__(self):
        if self.n_index is not None and self.n_index < 1:
            raise ValueError("n_index must be >= 1 (or None for the limit)")


@dataclass(frozen=True)
class FactorModel:
    """Y = loadings @ W + noise, W ~ N(0, I_m), noise ~ N(0, sigma^2 I_d)."""

    d: int
    m: int
    loadings: tuple  # d x m, row tuples
    sigma: float
    n: int
    seed: int = 0

    def __post_init__(self):
        L = np.asarray(self.loadings, dtype=float)
        if L.shape != (self.d, self.m):
            raise ValueError(f"loadings shape {L.shape}, expected ({self.d}, {self.m})")
        if self.sigma < 0 or self.n < 1:
            raise ValueError("sigma must be >= 0 and n >= 1")

    @property
    def loading_matrix(self) -> np.ndarray:
        return np.asarray(self.loadings, dtype=float)


@dataclass(frozen=True)
class FromCsv:
    path: str


DatasetSpec = Union[Parabola, StepCurve, InstabilityKernel, FactorModel, FromCsv]


def instability_signal() -> DiscreteMeasure:
    """The three-atom axis signal that every kernel split preserves."""
    return uniform_measure([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])


def _instability_measure(n_index: Optional[int]) -> DiscreteMeasure:
    base = instability_signal()
    if n_index is None:
        points = np.array(
            [[-2.0, 0.0], [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
        )
        weights = np.array([1 / 6, 1 / 6, 1 / 3, 1 / 6, 1 / 6])
        return DiscreteMeasure(points, weights)
    theta = np.pi * (1.0 - 1.0 / (2.0 * (n_index + 1)))
    off = np.array([np.cos(theta), np.sin(theta)])
    points = np.vstack([base.points + off, base.points - off])
    return uniform_measure(points)


def generate(spec: DatasetSpec) -> DiscreteMeasure:
    """Materialize a dataset spec as a uniform-weight empirical measure
    (exact weights for the kernel family)."""
    if isinstance(spec, Parabola):
        rng = np.random.default_rng(spec.seed)
        z = rng.uniform(-1.0, 1.0, size=spec.n)
        pts = np.column_stack([z, z**2])
        if spec.noise_sigma > 0:
            pts = pts + spec.noise_sigma * rng.standard_normal(pts.shape)
        return uniform_measure(pts)
    if isinstance(spec, StepCurve):
        rng = np.random.default_rng(spec.seed)
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]])
        seg = np.diff(corners, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        s = rng.uniform(0.0, cum[-1], size=spec.n)
        idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        frac = (s - cum[idx]) / seg_len[idx]
        pts = corners[idx] + frac[:, None] * seg[idx]
        if spec.noise_sigma > 0:
            pts = pts + spec.noise_sigma * rng.standard_normal(pts.shape)
        return uniform_measure(pts)
    if isinstance(spec, InstabilityKernel):
        return _instability_measure(spec.n_index)
    if isinstance(spec, FactorModel):
        rng = np.random.default_rng(spec.seed)
        L = spec.loading_matrix
        W = rng.standard_normal((spec.n, spec.m))
        noise = spec.sigma * rng.standard_normal((spec.n, spec.d))
        return uniform_measure(W @ L.T + noise)
    if isinstance(spec, FromCsv):
        return load_measure_csv(spec.path)
    raise TypeError(f"unknown dataset spec: {spec!r}")
