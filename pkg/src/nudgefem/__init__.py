"""Finite-element solvers and experiments for continuous data assimilation
(nudging) of the variable-coefficient heat equation with Neumann boundary
conditions on the square [-1, 1]^2."""

__version__ = "1.0.0"

from .fem import AssembledOperators, QuadratureConfig, assemble_operators
from .mesh import Mesh, build_mesh, build_nesting
from .problems import TestProblem, make_problem, solve_kellogg_parameters
from .strategies import ObservationStrategy, build_strategy
from .timestepper import RunRecord, SchemeConfig, run
from .analysis import (RateTable, accumulated_error, error_norms,
                       fit_exponential_rate, roc_table)

__all__ = [
    "AssembledOperators", "QuadratureConfig", "assemble_operators",
    "Mesh", "build_mesh", "build_nesting",
    "TestProblem", "make_problem", "solve_kellogg_parameters",
    "ObservationStrategy", "build_strategy",
    "RunRecord", "SchemeConfig", "run",
    "RateTable", "accumulated_error", "error_norms",
    "fit_exponential_rate", "roc_table",
    "__version__",
]
