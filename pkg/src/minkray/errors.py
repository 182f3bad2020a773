"""Exception types shared across the package."""


class MinkrayError(Exception):
    """Base class for all package errors."""


class DomainError(MinkrayError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularPointError(DomainError):
    """A gradient was requested at a point with multiple projections.

    Carries the offending projection so callers can inspect the feet.
    """

    def __init__(self, message, projection=None):
        super().__init__(message)
        self.projection = projection


class GeometryError(MinkrayError, RuntimeError):
    """Input geometry violates an admission hypothesis (simple, C2, ...)."""


class NumericError(MinkrayError, RuntimeError):
    """An iterative numerical procedure failed to reach its tolerance."""


class ConfigError(MinkrayError, ValueError):
    """A scene configuration document is malformed or inconsistent."""
