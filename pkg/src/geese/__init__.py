"""Surrogate-guided correction of failed state estimations in inverse problems.

The optimizer minimizes an accumulated physical error using an ensemble
surrogate for the expensive error terms, a trained exploitation generator and
a randomly re-weighted exploration generator.
"""

from geese.errors import (
    BudgetExceededError,
    ConfigError,
    EvaluatorFaultError,
    InputShapeError,
    InvalidEnsembleError,
    InvalidStateError,
    InvalidTargetError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "ConfigError",
    "EvaluatorFaultError",
    "InputShapeError",
    "InvalidEnsembleError",
    "InvalidStateError",
    "InvalidTargetError",
    "TrainingDivergedError",
]
