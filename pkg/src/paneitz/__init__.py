"""Numerical toolkit for the Paneitz operator and Q-curvature.

Subpackages cover pointwise curvature on coordinate charts, radial bubble
integrals on Euclidean space, zonal spectral calculus on the round sphere,
and a normalized flow for the Paneitz-Sobolev quotient.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, FitError, MetricError, NonFiniteError,
                     PaneitzError, PositivityError, QuadratureError, StepUnderflowError,
                     SupportError, TruncationWarning)

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "FitError",
    "MetricError",
    "NonFiniteError",
    "PaneitzError",
    "PositivityError",
    "QuadratureError",
    "StepUnderflowError",
    "SupportError",
    "TruncationWarning",
]
