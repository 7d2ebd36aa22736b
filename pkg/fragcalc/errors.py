"""
Exception hierarchy shared by the toolkit.
"""
from dataclasses import dataclass
from typing import Optional, Tuple


class FragcalcError(Exception):
    """Base class for all domain errors."""

    def __init__(self, message: str, path: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.message = message
        self.path = path

    def __str__(self) -> str:
        if self.path:
            return f"{self.message} (at {'.'.join(map(str, self.path))})"
        return self.message


class SignatureError(FragcalcError):
    """Malformed language: duplicate names, undeclared sorts, clashes."""


class SortError(FragcalcError):
    """Sort mismatch in a term, substitution or binder."""


class FormulaSyntaxError(FragcalcError):
    """Text could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line is not None:
            return f"{self.message} (line {self.line}, column {self.column})"
        return self.message


class FragmentError(FragcalcError):
    """Formula outside a required fragment, or descriptor violating a hypothesis."""


class ReductionError(FragcalcError):
    """Invalid reduction parameters."""


class EvaluationError(FragcalcError):
    """Formula cannot be evaluated in the given structure."""


class ResourceLimitError(EvaluationError):
    """A configured budget would be exceeded."""


class GraphQueryError(FragcalcError):
    """Unknown node or contradictory assumptions."""


@dataclass(frozen=True)
class DecodeFailure:
    """Returned by decoders for numbers outside the image of the coding."""
    code: int
    reason: str

    def __bool__(self) -> bool:
        return False
