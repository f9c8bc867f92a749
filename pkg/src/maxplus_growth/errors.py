"""Exception hierarchy shared by the library and the CLI.

Usage errors (bad shapes, invalid models) derive from ``ValueError``;
estimation failures derive from ``EstimationError`` so the CLI can map
them to distinct exit codes.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Operation undefined for the given operand (e.g. eps to a non-positive power)."""


class ModelError(ValueError):
    """Invalid distribution or matrix model specification."""


class EstimationError(RuntimeError):
    """An expectation or bound could not be computed."""


class UnsupportedModelError(EstimationError):
    """The requested method does not apply to this model."""


class BudgetExceededError(EstimationError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"exact enumeration needs {count} joint outcomes, cap is {cap}")
        self.count = count
        self.cap = cap


class FixtureUnavailableError(EstimationError):
    """No reference constant exists for the requested functional."""


class PreconditionError(EstimationError):
    """A bound's precondition does not hold for the supplied inputs."""
