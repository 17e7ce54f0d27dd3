"""Exception hierarchy.

Everything derived from :class:`ValidationError` signals bad input (CLI exit
code 2); :class:`BudgetExceeded` signals a computation that would exceed its
cell budget (exit code 3).
"""

from __future__ import annotations


class KoksmaError(Exception):
    """Base class for all package errors."""


class ValidationError(KoksmaError, ValueError):
    """Input violates a documented precondition."""


class DimensionMismatch(ValidationError):
    pass


class OutOfUnitCube(ValidationError):
    def __init__(self, index: int, coordinate: int, value: float):
        self.index = index
        self.coordinate = coordinate
        self.value = value
        super().__init__(
            f"point {index}, coordinate {coordinate}: {value!r} is outside [0, 1]"
        )


class MapRangeViolation(ValidationError):
    pass


class MapDomainError(ValidationError):
    """A tabulated map was applied to a point outside its declared support."""


class InvalidBase(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class InvalidMeasure(ValidationError):
    pass


class EmptySubset(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class InvalidDelta(ValidationError):
    pass


class InvalidClassPriors(ValidationError):
    pass


class SingularSystem(ValidationError):
    pass


class MissingNoiseRecord(ValidationError):
    pass


class BudgetExceeded(KoksmaError):
    def __init__(self, required: int, budget: int, what: str = "cells"):
        self.required = int(required)
        self.budget = int(budget)
        super().__init__(f"{what} required {self.required} exceeds budget {self.budget}")
