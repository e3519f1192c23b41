"""First-eigenvalue bounds from one-dimensional weighted p-Laplacian model problems."""
from .errors import (BracketFailure, DomainError, NoConvergence, SolverError,
                     StabilityError, StepFailure, ValidationError)
from .model import (GeometryProfile, Kind, ModelProblem, dirichlet_problem,
                    neumann_problem, parse_profile, quaternionic_profile,
                    riemannian_profile, validate)
from .shoot import EigenResult, Trajectory, solve, solve_neumann_full

__version__ = "0.1.0"

__all__ = [
    "BracketFailure", "DomainError", "EigenResult", "GeometryProfile", "Kind",
    "ModelProblem", "NoConvergence", "SolverError", "StabilityError", "StepFailure",
    "Trajectory", "ValidationError", "dirichlet_problem", "neumann_problem",
    "parse_profile", "quaternionic_profile", "riemannian_profile", "solve",
    "solve_neumann_full", "validate",
]
