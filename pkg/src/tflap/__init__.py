"""Finite difference scheme for the 2D tempered fractional Laplacian on a square."""
from .manufactured import TestFunction, source_term, u1, u2
from .operator import GridFunction, StencilOperator, build_fast_operator, dense_matrix
from .solver import SolveReport, cg_solve
from .studies import (ConvergenceTable, convergence_rate, exit_time_field, grid_norms,
                      poisson_study, self_convergence_study, truncation_study)
from .weights import ProblemConfig, WeightStencil, assemble_stencil, normalization_constant

__all__ = [
    "ConvergenceTable", "GridFunction", "ProblemConfig", "SolveReport", "StencilOperator",
    "TestFunction", "WeightStencil", "assemble_stencil", "build_fast_operator", "cg_solve",
    "convergence_rate", "dense_matrix", "exit_time_field", "grid_norms", "normalization_constant",
    "poisson_study", "self_convergence_study", "source_term", "truncation_study", "u1", "u2",
]
