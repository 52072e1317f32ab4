"""Tangent-point energy and the fractional Sobolev metric on closed polylines."""

from .curve import (
    Curve,
    CurveError,
    EmbeddingError,
    arc_length,
    circle,
    distortion,
    edge_data,
    figure_eight,
    from_samples,
    generate,
    is_embedded,
    min_separation,
    random_smooth,
    resample_uniform,
    torus_knot,
)
from .energy import (
    EnergyReport,
    circle_energy_closed_form,
    de_form,
    energy,
    energy_report,
    grad_energy,
)
from .geodesic import (
    Constraint,
    ConstraintDegeneracyError,
    DiscretePath,
    PhaseState,
    Trajectory,
    barycenter_constraint,
    connect,
    flow,
    length_constraint,
    path_energy,
    path_length,
    shoot,
    shoot_constrained,
    spray,
)
from .kernel import DEFAULT_QUADRATURE, PairTable, Quadrature, build_pair_table, lambda_ratio, rs_apply
from .metric import FormValues, GramOperator, PositivityError, assemble_gram, bilinear_forms, g_inner, g_norm, riesz_solve
from .variation import MetricDerivatives, apply_dG, christoffel_apply, grad_metric

__version__ = "0.1.0"

__all__ = [
    "Curve",
    "CurveError",
    "EmbeddingError",
    "arc_length",
    "circle",
    "distortion",
    "edge_data",
    "figure_eight",
    "from_samples",
    "generate",
    "is_embedded",
    "min_separation",
    "random_smooth",
    "resample_uniform",
    "torus_knot",
    "EnergyReport",
    "circle_energy_closed_form",
    "de_form",
    "energy",
    "energy_report",
    "grad_energy",
    "Constraint",
    "ConstraintDegeneracyError",
    "DiscretePath",
    "PhaseState",
    "Trajectory",
    "barycenter_constraint",
    "connect",
    "flow",
    "length_constraint",
    "path_energy",
    "path_length",
    "shoot",
    "shoot_constrained",
    "spray",
    "DEFAULT_QUADRATURE",
    "PairTable",
    "Quadrature",
    "build_pair_table",
    "lambda_ratio",
    "rs_apply",
    "FormValues",
    "GramOperator",
    "PositivityError",
    "assemble_gram",
    "bilinear_forms",
    "g_inner",
    "g_norm",
    "riesz_solve",
    "MetricDerivatives",
    "apply_dG",
    "christoffel_apply",
    "grad_metric",
]
