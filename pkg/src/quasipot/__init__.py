"""quasipot: quasi-potential solver for 2D nongradient SDEs on regular meshes.

Computes the Freidlin-Wentzell quasi-potential of dx = b(x) dt + sqrt(eps) dW
with respect to a stable equilibrium or limit cycle by ordered line-integral
methods (four quadrature rules) or the upwind finite-difference baseline,
and traces minimum action paths from the result.
"""

from .field import (VectorField, builtin_field, eval_b, eval_b_many,
                    exact_limit_cycle, exact_linear, jacobian,
                    make_limit_cycle, make_linear, parse_field,
                    EXACT_SOLUTIONS, FieldEvalError, FieldParseError)
from .mesh import Mesh, PointState, StateGrid
from .postprocess import (GradientGrid, Path, PathStatus, error_metrics,
                          fit_power_law, freidlin_wentzell_action,
                          geometric_action, gradient, trace_map)
from .quadrature import (ExactWithinRoundoff, QuadRule, SegmentSamples,
                         empirical_order, integrand, reference_action,
                         samples_from_field, segment_action)
from .solver import (ConsideredHeap, CurveInit, InitializationError,
                     PointInit, SolutionGrid, SolverConfig,
                     curve_seed_values, init_curve, init_point,
                     rule_of_thumb_K, solve, unit_circle_polyline, METHODS)
from .updates import (RootProblem, RootResult, UpdateCandidate, hybrid_root,
                      one_point_update, oum_triangle_update, triangle_update)

__version__ = "0.1.0"

__all__ = [
    "Mesh", "PointState", "StateGrid",
    "VectorField", "builtin_field", "make_linear", "make_limit_cycle",
    "parse_field", "eval_b", "eval_b_many", "jacobian",
    "exact_linear", "exact_limit_cycle", "EXACT_SOLUTIONS",
    "FieldParseError", "FieldEvalError",
    "QuadRule", "SegmentSamples", "samples_from_field", "integrand",
    "segment_action", "empirical_order", "reference_action",
    "ExactWithinRoundoff",
    "UpdateCandidate", "RootProblem", "RootResult", "hybrid_root",
    "one_point_update", "triangle_update", "oum_triangle_update",
    "SolverConfig", "PointInit", "CurveInit", "SolutionGrid",
    "ConsideredHeap", "InitializationError", "METHODS",
    "init_point", "init_curve", "curve_seed_values", "solve",
    "rule_of_thumb_K",
    "unit_circle_polyline",
    "GradientGrid", "Path", "PathStatus", "gradient", "trace_map",
    "geometric_action", "freidlin_wentzell_action", "error_metrics",
    "fit_power_law",
]
