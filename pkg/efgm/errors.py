"""Exception hierarchy shared by the eFGM modules and the CLI."""

from typing import Optional


class EFGMError(Exception):
    """Base class for every error raised by the eFGM toolkit."""

    def __init__(self, message: str, invariant: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.invariant = invariant

    def to_dict(self) -> dict:
        """Structured form used by the CLI on standard error."""
        return {
            "error": type(self).__name__,
            "invariant": self.invariant,
            "message": self.message,
        }


class InvalidInputError(EFGMError, ValueError):
    """Input violates a type invariant (length, range, normalisation)."""


class InadmissibleError(InvalidInputError):
    """Parameters fall outside the admissible set; `index` names the violating m or k."""

    def __init__(self, message: str, invariant: Optional[str] = None, index: Optional[int] = None):
        super().__init__(message, invariant)
        self.index = index

    def to_dict(self) -> dict:
        result = super().to_dict()
        result["index"] = self.index
        return result


class CapabilityError(InvalidInputError):
    """An exponential-cost oracle was asked for a dimension it cannot handle."""


class NumericError(EFGMError, ArithmeticError):
    """A numerical procedure failed (root solve, discretisation, NaN)."""


class EvaluationError(NumericError):
    """Density evaluation produced a non-positive value inside a log-likelihood."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message, invariant="positive-density")
        self.row = row

    def to_dict(self) -> dict:
        result = super().to_dict()
        result["row"] = self.row
        return result
