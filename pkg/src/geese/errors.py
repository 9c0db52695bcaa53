"""Exception types raised across the package."""


class InputShapeError(ValueError):
    """Input vector does not match the expected dimension."""


class TrainingDivergedError(RuntimeError):
    """A training loss became NaN or infinite."""

    def __init__(self, iteration: int, loss: float):
        super().__init__(f"training diverged at iteration {iteration} (loss={loss})")
        self.iteration = iteration
        self.loss = loss


class InvalidEnsembleError(ValueError):
    """Ensemble is too small for the requested operation."""


class EvaluatorFaultError(RuntimeError):
    """An error term evaluated to a non-finite value."""


class BudgetExceededError(RuntimeError):
    """The query ledger has no budget left."""


class InvalidStateError(ValueError):
    """A state vector contains non-finite entries."""


class InvalidTargetError(ValueError):
    """An observation target has a zero component."""


class ConfigError(ValueError):
    """Inconsistent or unusable configuration."""
