"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FieldNewtonError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(FieldNewtonError, ValueError):
    """Operands disagree on number of generators, order, or array shape."""


class DomainError(FieldNewtonError, ArithmeticError):
    """A function was evaluated outside its domain (log of non-positive, pole, ...)."""


class DegenerateMetricError(DomainError):
    """The metric matrix is singular (or nearly so) at the evaluation point."""


class ParseError(FieldNewtonError, ValueError):
    """Malformed expression text; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.message = message
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} at offset {position}"
        super().__init__(message)


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, position: int | None = None, text: str | None = None):
        self.name = name
        super().__init__(f"unknown identifier '{name}'", position, text)


class ValidationError(FieldNewtonError, ValueError):
    """Input data violates a structural rule (asymmetric force, rank > 1, ...)."""


class StencilError(FieldNewtonError, ValueError):
    """Not enough grid nodes for the requested finite-difference stencil."""
