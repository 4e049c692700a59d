"""Exception types raised across the package."""


class KnotFieldError(Exception):
    """Base class for library errors."""


class DomainError(KnotFieldError, ValueError):
    """An argument lies outside the operation's domain (bad label, speed >= 1, ...)."""


class DegenerateLandscapeError(KnotFieldError):
    """Energy density too small to locate a maximum."""


class DegenerateSeedError(KnotFieldError):
    """Field vanishes at a field-line seed point."""


class StiffnessError(KnotFieldError):
    """Integrator step size underflowed."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class FieldPropagationError(KnotFieldError):
    """The field provider returned non-finite values."""
