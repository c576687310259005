"""Metric geometry on finite samples: sub-Riemannian distances, Lipschitz embeddings, path-isometry checks."""

from .metric import (
    DisconnectedError, DomainError, FiniteMetricSpace, LengthGraph, MetricImage, NonInjectiveError, PointMap,
    PolygonalCurve, UnreachableError, curve_length, delta_injectivity, distortion, lip_norm, pull_matrix,
    pull_metric, pull_profile, shortest_path_metric,
)
from .subriemannian import (
    INFINITY, ApproximantSchedule, GridDomain, HorizontalStructure, NormFieldPlanar, StencilSolver,
    approximant_weight, cc_distance, default_grid, finsler_length, model_catalog, monotone_convergence_report,
)
from .lipembed import (
    ConstructionError, build_cover, embed, general_position_margin, menger_map, partition_of_unity, refine,
    sample_general_position, secant_projection, stability_radius,
)
from .isometry import (
    EmbeddedCloud, TubeSpec, central_collapse_ratio, induced_path_metric, isometry_equivalence_check,
    linear_finsler_defect, path_isometry_defect, tube_comparison,
)

__version__ = "0.1.0"
