"""Exception types shared across the library."""


class MemwalkError(Exception):
    """Base class for all library-specific errors."""


class DimensionError(MemwalkError, ValueError):
    """Operands have incompatible shapes, orders, or mode sizes."""


class ValidationError(MemwalkError, ValueError):
    """An input object violates a structural invariant."""


class ParseError(ValidationError):
    """A text input could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StructuralError(MemwalkError):
    """The requested analysis is undefined for the given chain structure."""


class IterationLimitError(MemwalkError):
    """An iterative solver exhausted its iteration budget.

    Carries the last iterate and its residual for post-mortem inspection.
    """

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


class IntegrationError(MemwalkError):
    """A trajectory integration violated a conservation or sign tolerance."""


class CertificationError(MemwalkError):
    """A precondition of an analytic guarantee could not be certified."""
