from __future__ import annotations


class InvalidInputError(ValueError):
    """Raised when a permutation, threshold or other argument is malformed."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation (e.g. θ ≥ 1)."""


class EnumerationCapError(DomainError):
    """Raised when a factorial-cost oracle is asked for N above its configured cap."""


class NumericalError(RuntimeError):
    """Raised when a root finder or series fails to converge, or a numerical check fails."""


class RangeError(OverflowError):
    """Raised when a fixed-precision (binary64) quantity would overflow."""
