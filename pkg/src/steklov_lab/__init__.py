"""Spectral solver and identity oracles for a nonlinear Steklov problem on the unit ball."""

from .params import ProblemParams, constant_solution
from .spectral import BoundaryFunction, QuadratureRule, build_rule, default_rule
from .solver import (SolveResult, SolverOptions, continue_branch, find_bifurcation, minimize_quotient,
                     newton_solve)

__version__ = "0.1.0"

__all__ = [
    "BoundaryFunction", "ProblemParams", "QuadratureRule", "SolveResult", "SolverOptions", "build_rule",
    "constant_solution", "continue_branch", "default_rule", "find_bifurcation", "minimize_quotient",
    "newton_solve",
]
