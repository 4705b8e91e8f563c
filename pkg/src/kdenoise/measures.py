"""Discrete probability measures on R^d.

A measure is a weighted point cloud: an (m, d) array of atom locations and a
length-m vector of nonnegative weights summing to one.  This is the universal
data carrier for everything else in the package: transport plans couple two of
them, dominance checks compare two of them, and solvers return one.

Atom order is significant (curve solvers read index order as curve order), so
no operation here ever sorts or merges atoms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "MeasureError",
    "barycenter",
    "second_moment",
    "variance",
    "translate",
    "dilate",
    "center",
    "normalize",
    "uniform_measure",
    "dirac",
    "load_measure_csv",
    "save_measure_csv",
]

WEIGHT_SUM_TOL = 1e-12
CSV_WEIGHT_SUM_TOL = 1e-9


class MeasureError(ValueError):
    """Raised when an array pair does not form a valid discrete measure."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i w_i * delta_{x_i}`` on R^d.

    Attributes:
        points: (m, d) float array of atom coordinates.
        weights: (m,) float array, nonnegative, summing to 1 within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise MeasureError(f"points must be (m, d) with m,d >= 1, got shape {pts.shape}")
        if w.shape != (pts.shape[0],):
            raise MeasureError(f"weights shape {w.shape} does not match {pts.shape[0]} atoms")
        if not np.all(np.isfinite(pts)):
            raise MeasureError("points contain non-finite coordinates")
        if not np.all(np.isfinite(w)):
            raise MeasureError("weights contain non-finite entries")
        if np.any(w < 0):
            raise MeasureError(f"negative weight: min = {w.min():.3e}")
        s = w.sum()
        if abs(s - 1.0) > WEIGHT_SUM_TOL:
            raise MeasureError(f"weights sum to {s!r}, not 1 within {WEIGHT_SUM_TOL}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def uniform_measure(points) -> DiscreteMeasure:
    """Measure with weight 1/m on each row of ``points``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    return DiscreteMeasure(pts, np.full(m, 1.0 / m))


def dirac(point) -> DiscreteMeasure:
    """Point mass at ``point``."""
    return DiscreteMeasure(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))


def barycenter(mu: DiscreteMeasure) -> np.ndarray:
    """Weighted mean of the atoms, a length-d vector."""
    return mu.weights @ mu.points


def second_moment(mu: DiscreteMeasure) -> float:
    """E|X|^2 = sum_i w_i |x_i|^2."""
    return float(mu.weights @ np.einsum("ij,ij->i", mu.points, mu.points))


def variance(mu: DiscreteMeasure) -> float:
    """Total variance E|X - EX|^2 (trace of the covariance matrix)."""
    b = barycenter(mu)
    return second_moment(mu) - float(b @ b)


def translate(mu: DiscreteMeasure, k) -> DiscreteMeasure:
    """Pushforward under x -> x + k."""
    k = np.asarray(k, dtype=float)
    if k.shape != (mu.dim,):
        raise MeasureError(f"translation vector has shape {k.shape}, expected ({mu.dim},)")
    if not np.all(np.isfinite(k)):
        raise MeasureError("translation vector is not finite")
    return DiscreteMeasure(mu.points + k, mu.weights)


def dilate(mu: DiscreteMeasure, lam: float) -> DiscreteMeasure:
    """Pushforward under x -> lam * x."""
    lam = float(lam)
    if not np.isfinite(lam):
        raise MeasureError("dilation factor is not finite")
    return DiscreteMeasure(lam * mu.points, mu.weights)


def center(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Translate so the barycenter is 0 (sup-norm <= 1e-12 on output)."""
    return translate(mu, -barycenter(mu))


def normalize(mu: DiscreteMeasure, drop_tol: float = 0.0) -> DiscreteMeasure:
    """Drop atoms with weight <= drop_tol and renormalize the rest.

    Solvers call this before iterating: gradient updates can drive weights to
    (or slightly past) zero, and zero-weight atoms break conditional means.
    """
    keep = mu.weights > drop_tol
    if not np.any(keep):
        raise MeasureError("all atoms have weight <= drop_tol")
    w = mu.weights[keep]
    return DiscreteMeasure(mu.points[keep], w / w.sum())


def load_measure_csv(path) -> DiscreteMeasure:
    """Read a measure from CSV with header ``x1,...,xd,w``, one atom per row.

    Weights must sum to 1 within 1e-9; they are renormalized exactly on load.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MeasureError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "w" or any(
            h != f"x{i + 1}" for i, h in enumerate(header[:-1])
        ):
            raise MeasureError(
                f"{path}: header must be x1,...,xd,w, got {','.join(header)}"
            )
        d = len(header) - 1
        rows = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise MeasureError(f"{path}:{ln}: expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MeasureError(f"{path}:{ln}: {exc}") from None
    if not rows:
        raise MeasureError(f"{path}: no atoms")
    arr = np.asarray(rows, dtype=float)
    pts, w = arr[:, :d], arr[:, d]
    s = w.sum()
    if abs(s - 1.0) > CSV_WEIGHT_SUM_TOL:
        raise MeasureError(f"{path}: weights sum to {s!r}, not 1 within {CSV_WEIGHT_SUM_TOL}")
    return DiscreteMeasure(pts, w / s)


def save_measure_csv(mu: DiscreteMeasure, path) -> None:
    """Write a measure in the ``x1,...,xd,w`` CSV format."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(mu.dim)] + ["w"])
        for x, w in zip(mu.points, mu.weights):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(w))])
