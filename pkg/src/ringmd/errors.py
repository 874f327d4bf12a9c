"""Exception types shared across the package."""


class RingmdError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RingmdError):
    """Invalid input value; the message names the offending field."""


class PlacementError(RingmdError):
    """Molecules could not be placed in the cell without overlap."""


class ForceFieldError(RingmdError):
    """Singular or otherwise unusable pair geometry in a force evaluation."""


class ConstraintError(RingmdError):
    """Constraint solve failed (singular system or iteration limit).

    Carries the residual reached so drivers can log blow-up trajectories
    instead of losing them.
    """

    def __init__(self, message, max_residual=None, iterations=None):
        super().__init__(message)
        self.max_residual = max_residual
        self.iterations = iterations


class DiagnosticsError(RingmdError):
    """Trace too short or otherwise unfit for metric computation."""


class ConfigError(RingmdError):
    """Malformed scenario configuration; message names line and key."""
