from .anisotropic import solve_anisotropic
from .constrained import ConstraintSpec
from .constrained import constraint_residual
from .constrained import cubic
from .constrained import linear
from .constrained import multiplier_quotient
from .constrained import solve_constrained_poisson
from .descent import descend
from .direct import euler_lagrange_residual
from .direct import minimize_convex
from .direct import test_basis
from .dirichlet import solve_p_dirichlet
from .integrands import AnisotropicIntegrand
from .integrands import ConvexIntegrand
from .integrands import PowerIntegrand
from .integrands import QuadraticIntegrand
from .obstacle import ObstacleSpec
from .obstacle import solve_obstacle
from .obstacle import variational_inequality_margin
from .poincare import poincare_constant

__all__ = [
    "AnisotropicIntegrand",
    "ConstraintSpec",
    "ConvexIntegrand",
    "ObstacleSpec",
    "PowerIntegrand",
    "QuadraticIntegrand",
    "constraint_residual",
    "cubic",
    "descend",
    "euler_lagrange_residual",
    "linear",
    "minimize_convex",
    "multiplier_quotient",
    "poincare_constant",
    "solve_anisotropic",
    "solve_constrained_poisson",
    "solve_obstacle",
    "solve_p_dirichlet",
    "test_basis",
    "variational_inequality_margin",
]
