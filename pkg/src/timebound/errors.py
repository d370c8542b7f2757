"""Exception hierarchy shared by the verification toolkit."""

from __future__ import annotations


class TimeboundError(Exception):
    """Base class for all toolkit errors."""


class ModelDomainError(TimeboundError, ValueError):
    """A state or parameter is outside the model's domain."""


class JunctionError(TimeboundError, ValueError):
    """Two execution fragments do not meet at a common state and time."""


class SchemaViolationError(TimeboundError):
    """An adversary returned a choice that is not enabled, or left its schema."""


class UnitTimeViolation(SchemaViolationError):
    def __init__(self, witness):
        self.witness = witness
        super().__init__(
            f"process {witness.process} was ready but idle for time {witness.gap}"
        )


class UnsupportedModelError(TimeboundError):
    """The model lacks metadata an operation needs (processes, readiness, ...)."""


class InsufficientPrefixError(TimeboundError, ValueError):
    """An event cannot be decided from the given fragment."""


class BudgetExceededError(TimeboundError):
    def __init__(self, message: str, nodes: int = 0):
        self.nodes = nodes
        super().__init__(message)


class CompositionForbiddenError(TimeboundError):
    """Statements under a schema that is not execution closed cannot be composed."""


class ChainError(TimeboundError):
    """Adjacent statements do not fit together."""


class DivergentRecurrenceError(TimeboundError, ValueError):
    pass


class UnknownScenarioError(TimeboundError, KeyError):
    pass
