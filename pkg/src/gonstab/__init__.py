"""Linear stability of elliptic (1+n)-gon relative equilibria."""
from .coefficients import Scenario, block_coefficients, global_coefficients, sigma_n, trig_sums
from .errors import (
    CollisionError,
    ConvergenceFailure,
    DomainError,
    GoldenMismatch,
    GonstabError,
    IntegrationFailure,
    PropertyViolation,
    VerificationFailure,
)

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "block_coefficients",
    "global_coefficients",
    "sigma_n",
    "trig_sums",
    "GonstabError",
    "DomainError",
    "CollisionError",
    "VerificationFailure",
    "IntegrationFailure",
    "ConvergenceFailure",
    "PropertyViolation",
    "GoldenMismatch",
]
