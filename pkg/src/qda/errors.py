"""Exception types shared across the package."""


class QDAError(Exception):
    """Base class for all package errors."""


class InvalidInput(QDAError, ValueError):
    """Raised for malformed arguments (bad shapes, out-of-range parameters)."""


class DimensionMismatch(InvalidInput):
    """Operands live on spaces of different dimension."""


class PreconditionError(InvalidInput):
    """A bound was requested outside the regime where it is certified."""


class ZeroProbabilityError(QDAError, ArithmeticError):
    """Conditioning on an outcome of probability zero."""


class ResourceCapExceeded(QDAError, MemoryError):
    """A simulation would exceed the configured dimension cap.

    Attributes
    ----------
    required : float
        Dimension the requested simulation would need.
    allowed : int
        The active cap.
    """

    def __init__(self, required, allowed, what="simulation"):
        self.required = required
        self.allowed = allowed
        super().__init__(f"{what} needs dimension {_magnitude(required)} but the cap is {allowed}")


def _magnitude(x):
    """Short form of a possibly huge integer dimension."""
    if isinstance(x, int) and x.bit_length() > 1000:
        return f"~2^{x.bit_length() - 1}"
    return f"{x:.4g}"


class UnsupportedBackend(ResourceCapExceeded):
    """The only backend able to fit the instance cannot represent an event."""

    def __init__(self, message, required=float("inf"), allowed=0):
        self.required = required
        self.allowed = allowed
        QDAError.__init__(self, message)


class OverBudget(QDAError, RuntimeError):
    """The shadow-tomography driver needed more rounds than budgeted."""


class Ambiguous(QDAError, RuntimeError):
    """Unique decoding observed zero or several consistent hypotheses."""
