"""
Exception hierarchy shared by the quantum, estimator, vqse and experiments apps.
"""
from typing import Any, Dict, List, Optional


class QneeError(Exception):
    """Base class for every error raised by the toolkit."""


class ArgumentError(QneeError, ValueError):
    """An argument is outside the range an operation accepts."""


class StateValidationError(QneeError, ValueError):
    """A matrix, vector or distribution violates its invariants."""


class CapacityError(QneeError):
    """The requested problem is too large for dense simulation."""


class EstimateRangeError(QneeError, ArithmeticError):
    """A cost value cannot be converted back into an entropy."""


class TrainingError(QneeError):
    """Network training diverged (non-finite cost)."""

    def __init__(self, message: str, history: Optional[List[Any]] = None):
        super().__init__(message)
        self.history = list(history or [])


class EstimationError(QneeError):
    """Every trial of an estimation run failed."""

    def __init__(self, message: str, histories: Optional[Dict[int, List[Any]]] = None):
        super().__init__(message)
        self.histories = dict(histories or {})


class OutputError(QneeError):
    """Writing or reading a result file failed."""

    def __init__(self, message: str, path: Any = None):
        super().__init__(f"{message} (path: {path})" if path is not None else message)
        self.path = path


class InvariantFailure(QneeError):
    """At least one oracle check of the invariant suite failed."""

    def __init__(self, message: str, failed: Optional[List[str]] = None):
        super().__init__(message)
        self.failed = list(failed or [])
