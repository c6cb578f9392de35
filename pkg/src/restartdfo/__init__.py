"""Derivative-free trust-region optimization with multiple restarts."""
from .interp_models import InterpolationSet, QuadraticModel, PoorGeometryError
from .solver import SolverOptions, SolveResult, minimize
from .problems import get_problem, problem_names, NoiseModel

__all__ = [
    "InterpolationSet",
    "QuadraticModel",
    "PoorGeometryError",
    "SolverOptions",
    "SolveResult",
    "minimize",
    "get_problem",
    "problem_names",
    "NoiseModel",
]
__version__ = "0.1.0"
