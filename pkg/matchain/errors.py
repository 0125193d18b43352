"""Exception types shared across the solver modules."""

from __future__ import annotations


class MatchainError(Exception):
    """Base class for every error raised by matchain."""


class DimensionMismatchError(MatchainError, ValueError):
    """Matrix or vector shapes do not fit together."""


class IterationLimitError(MatchainError):
    """The simplex kernel hit its pivot limit (numerical cycling)."""


class BudgetExceededError(MatchainError):
    """Complete enumeration would evaluate more sequences than allowed."""


class DataFormatError(MatchainError, ValueError):
    """An input file is malformed (missing cells, duplicates, bad values)."""


class UnknownMaterialError(MatchainError, KeyError):
    """A coating material is not part of the library."""


class NonPhysicalInputError(MatchainError, ArithmeticError):
    """Reflectance denominator vanished; the matrix is not a transfer matrix."""


class UnsupportedObjectiveError(MatchainError, TypeError):
    """The formulation builder only accepts linear objectives."""
