"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SymsqError(Exception):
    """Base class for all library errors."""


class ArgumentError(SymsqError, ValueError):
    pass


class IntegrityError(SymsqError):
    pass


class PrecisionError(SymsqError):
    """Raised when a coefficient table is too short; carries the missing index."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class DomainError(SymsqError, ValueError):
    pass


class PoleError(SymsqError, ZeroDivisionError):
    pass


class SingularityError(SymsqError):
    def __init__(self, message: str, factor_index: int | None = None):
        super().__init__(message)
        self.factor_index = factor_index


class ConvergenceError(SymsqError):
    pass


class ContourError(SymsqError):
    pass


class EvaluationError(SymsqError, ArithmeticError):
    pass


class UnsupportedError(SymsqError, NotImplementedError):
    pass


class PreconditionError(SymsqError, ValueError):
    pass


class TruncationError(SymsqError):
    pass


class IntegrityWarning(UserWarning):
    pass
