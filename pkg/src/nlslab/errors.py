"""Exception types raised across the package."""


class NLSLabError(Exception):
    """Base class for all package errors."""


class GridError(NLSLabError, ValueError):
    pass


class CorruptFieldError(NLSLabError):
    """A field contains NaN or Inf values."""


class UndecidableModelError(NLSLabError):
    """Model lies outside the built-in catalog; hypotheses cannot be decided."""


class HypothesisViolation(NLSLabError):
    """A theorem's hypotheses do not hold for the requested route."""

    def __init__(self, message, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)


class MassCollapseError(NLSLabError):
    """Stationary iteration converged to the zero field."""


class DivergenceError(NLSLabError):
    """Stationary iteration residual blew up."""


class NotDilationReachable(NLSLabError):
    """Q does not change sign along the dilation orbit of a field."""


class EmptyConstraintSlice(NLSLabError):
    """No candidate of the search family satisfies the constraint."""
