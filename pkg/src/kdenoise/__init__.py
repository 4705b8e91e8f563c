"""Denoising of discrete distributions by variance maximization under
convex-order or Kantorovich-dominance constraints, with exact and entropic
optimal-transport kernels and solvers for curve, subspace, and clustering
domains."""

from .measures import (
    DiscreteMeasure,
    MeasureError,
    barycenter,
    center,
    dilate,
    dirac,
    load_measure_csv,
    normalize,
    save_measure_csv,
    second_moment,
    translate,
    uniform_measure,
    variance,
)
from .transport import (
    Coupling,
    SinkhornConfig,
    TransportError,
    TransportResult,
    coupling_cost,
    exact_ot,
    inner_product_cost,
    max_correlation,
    sinkhorn,
    squared_cost,
    w2_squared,
)
from .dominance import (
    ConvexOrderVerdict,
    KdrVerdict,
    barycentric_recenter,
    is_convex_order,
    is_monotone_support,
    kdr_check,
)

__version__ = "0.1.0"
