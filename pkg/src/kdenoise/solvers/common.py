"""Shared pieces for the solvers: centering, exact diagnostics, PC init."""

from __future__ import annotations

import numpy as np

from ..measures import (
    DiscreteMeasure,
    barycenter,
    second_moment,
    translate,
    variance,
)
from ..transport import Coupling, max_correlation, w2_squared


def principal_directions(nu: DiscreteMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the covariance of nu, eigenvalues descending.

    Ties are resolved by the deterministic ordering of ``eigh`` plus a sign
    convention: each eigenvector's largest-magnitude entry is positive.
    """
    yc = nu.points - barycenter(nu)
    cov = (yc * nu.weights[:, None]).T @ yc
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        j = np.argmax(np.abs(vecs[:, k]))
        if vecs[j, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def pc_line_init(nu_centered: DiscreteMeasure, m: int, span_sd: float = 1.5) -> np.ndarray:
    """m atoms evenly spaced on the first principal component of centered data."""
    vals, vecs = principal_directions(nu_centered)
    sd = np.sqrt(max(vals[0], 1e-300))
    t = np.linspace(-span_sd * sd, span_sd * sd, m)
    return t[:, None] * vecs[:, 0][None, :]


def exact_diagnostics(mu: DiscreteMeasure, nu: DiscreteMeasure) -> dict:
    """Exact-LP variance / W2^2 / KDR slack of mu against nu.

    The slack is the moment-gap form computed in the frame translated by
    -barycenter(nu), matching dominance.kdr_check.
    """
    shift = -barycenter(nu)
    mu_c = translate(mu, shift)
    nu_c = translate(nu, shift)
    w2 = w2_squared(mu_c, nu_c)
    slack = second_moment(nu_c) - second_moment(mu_c) - w2.value
    return {
        "variance": variance(mu),
        "w2_squared": w2.value,
        "kdr_slack": float(slack),
        "coupling": Coupling(w2.coupling.mass, mu, nu),
        "max_correlation": float(max_correlation(mu_c, nu_c).value),
    }


def polyline_length(x: np.ndarray) -> float:
    """Sum of segment lengths of the ordered atom chain."""
    if len(x) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(x, axis=0), axis=1).sum())


def curvature_value(x: np.ndarray, floor: float = 1e-9) -> float:
    """Total curvature sum of cos^2(theta_i / 2) = |e_i|^2 / 4 over interior atoms."""
    if len(x) < 3:
        return 0.0
    seg = np.diff(x, axis=0)
    norms = np.maximum(np.linalg.norm(seg, axis=1), floor)
    unit = seg / norms[:, None]
    e = unit[1:] - unit[:-1]
    return float(0.25 * (e**2).sum())
