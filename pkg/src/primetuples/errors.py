"""Exception types shared across the package."""


class PrimeTuplesError(Exception):
    """Base class for all package errors."""


class InvalidArgument(PrimeTuplesError, ValueError):
    pass


class OutOfRange(PrimeTuplesError, IndexError):
    """An argument exceeds the range covered by a precomputed table."""


class ResourceLimit(PrimeTuplesError, RuntimeError):
    """An enumeration or evaluation would exceed its configured budget."""


class NumericFailure(PrimeTuplesError, ArithmeticError):
    """An iterative numerical method failed to converge."""


class BracketError(PrimeTuplesError, ValueError):
    """Root finding was given an interval without a sign change."""


class DegenerateWeight(PrimeTuplesError, ZeroDivisionError):
    """A sieve weight vanished identically on the sampled range."""
