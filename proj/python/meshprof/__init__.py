"""Adaptive piecewise-constant profiles of blackbox algorithms."""

from ._core import (
    BuildResult,
    GridDomain,
    ProfileError,
    Subdivision,
    ValidationError,
    __version__,
    build_fixture,
    build_function,
    combine,
    cost_estimate,
    error_vs_fixture,
    evaluate_view,
    leaves_csv,
    parameter_profile,
    parameter_sweep,
    reduce_max,
    render_slice,
    select,
    selection_map,
    view_weights,
    weighted_average,
)

__all__ = [
    "BuildResult",
    "GridDomain",
    "ProfileError",
    "Subdivision",
    "ValidationError",
    "__version__",
    "build_fixture",
    "build_function",
    "combine",
    "cost_estimate",
    "error_vs_fixture",
    "evaluate_view",
    "leaves_csv",
    "parameter_profile",
    "parameter_sweep",
    "reduce_max",
    "render_slice",
    "select",
    "selection_map",
    "view_weights",
    "weighted_average",
]
