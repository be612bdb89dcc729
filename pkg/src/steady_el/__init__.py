"""Self-similar solutions of the steady Ericksen-Leslie system: construction and verification."""

from .errors import (NotASolution, PreconditionError, SolverError, SteadyELError,
                     Unclassifiable, ValidationError)
from .families import (SolutionSpec, classify_profile, from_dict, make_case_i, make_case_ii,
                       make_case_iii, make_constant_director, make_custom_profile,
                       make_hedgehog, make_landau)
from .grid import GridSpec, Quadrature, annulus_grid, sphere_quadrature
from .profile import ProfileSolution, ShootingConfig, scan_existence, solve_profile
from .stencil import StencilConfig, fd_derivative

__all__ = [
    "GridSpec", "NotASolution", "PreconditionError", "ProfileSolution", "Quadrature",
    "ShootingConfig", "SolutionSpec", "SolverError", "SteadyELError", "StencilConfig",
    "Unclassifiable", "ValidationError", "annulus_grid", "classify_profile", "fd_derivative",
    "from_dict", "make_case_i", "make_case_ii", "make_case_iii", "make_constant_director",
    "make_custom_profile", "make_hedgehog", "make_landau", "scan_existence", "solve_profile",
    "sphere_quadrature",
]
