"""Solver for the semilinear time-fractional diffusion equation

    D^alpha (u - u0) - u_xx = f(u)   on (0, 1) x (0, T],  u = 0 on the boundary,

discretised by piecewise constants on graded time grids and P1 finite
elements in space.
"""

from .fracquad import ConvWeights, GradedGrid, eta_predictors, graded_grid, stability_bound
from .mesh_fem import FeFunction, Mesh1D, TridiagonalMatrix, build_mesh, l2_project, parse_datum
from .mittag_leffler import mittag_leffler
from .norms import ErrorReport, error_report, observed_order
from .solver import (
    NonlinearSpec,
    PiecewiseConstant,
    SolverConfig,
    SpaceTimeSolution,
    StabilityError,
    StepFailure,
    solve,
    sqrt1p,
)

__all__ = [
    "ConvWeights", "ErrorReport", "FeFunction", "GradedGrid", "Mesh1D", "NonlinearSpec",
    "PiecewiseConstant", "SolverConfig", "SpaceTimeSolution", "StabilityError", "StepFailure",
    "TridiagonalMatrix", "build_mesh", "error_report", "eta_predictors", "graded_grid",
    "l2_project", "mittag_leffler", "observed_order", "parse_datum", "solve", "sqrt1p",
    "stability_bound",
]
__version__ = "0.1.0"
