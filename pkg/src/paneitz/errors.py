"""Exception and warning types shared across the package."""


class PaneitzError(Exception):
    """Base class for errors raised by this package."""


class DomainError(PaneitzError, ValueError):
    """A point or stencil leaves the coordinate box of a chart."""


class MetricError(PaneitzError, ValueError):
    """The metric is not symmetric positive definite where it was queried."""


class StepUnderflowError(PaneitzError, ValueError):
    """A finite-difference or time step became too small to be meaningful."""


class PositivityError(PaneitzError, ValueError):
    """A field that must stay positive has a non-positive nodal value."""


class SupportError(PaneitzError, ValueError):
    """A compactly supported field does not vanish on the integration boundary."""


class QuadratureError(PaneitzError, RuntimeError):
    """An adaptive quadrature did not reach its tolerance within budget."""


class FitError(PaneitzError, ValueError):
    """A least-squares fit was requested on a degenerate design."""


class ConfigError(PaneitzError, ValueError):
    """An experiment configuration failed validation."""


class NonFiniteError(PaneitzError, ArithmeticError):
    """A computation produced NaN or infinite values."""


class TruncationWarning(UserWarning):
    """A spectral projection discarded more energy than the flag threshold."""
