from __future__ import annotations

from typing import Any, Sequence


class TFCError(Exception):
    """Base class for solver toolkit errors."""


class InstanceError(TFCError):
    """Invalid instance data (bad weights, duplicate edges, capacity sum)."""


class DimensionError(TFCError):
    """A solution does not match the dimensions of its instance."""


class InfeasibleSolutionError(TFCError):
    """A solution violates the assignment or capacity constraints."""

    def __init__(self, message: str, violations: Sequence[Any] = ()) -> None:
        super().__init__(message)
        self.violations = list(violations)


class LPError(TFCError):
    """The LP engine failed (infeasible, unbounded or numerical trouble)."""


class IterationLimitError(LPError):
    """The LP engine exhausted its iteration budget."""


class RoundingError(TFCError):
    """A pipage step would break feasibility."""


class BudgetExceeded(TFCError):
    """The exact search ran out of nodes before proving optimality."""

    def __init__(self, message: str, *, incumbent: Any, value: float, bound: float) -> None:
        super().__init__(message)
        self.incumbent = incumbent
        self.value = value
        self.bound = bound

    @property
    def gap(self) -> float:
        return max(0.0, self.bound - self.value)


class SchemaError(TFCError):
    """An input file does not follow its documented schema."""
