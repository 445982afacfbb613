"""Exception hierarchy for PressBench."""


class PressBenchError(Exception):
    """Base class for all PressBench errors."""


class ConfigurationError(PressBenchError):
    """Invalid configuration or violated data precondition."""


class DomainError(PressBenchError, ValueError):
    """Argument outside the domain of an operation."""


class ShapeError(PressBenchError, ValueError):
    """Array or tensor shape mismatch."""


class TrainingStateError(PressBenchError, RuntimeError):
    """Gradient requested before a forward pass was recorded."""


class TrainingDivergedError(PressBenchError, RuntimeError):
    """Loss became NaN or infinite during training."""

    def __init__(self, step: int, lr: float, loss: float):
        self.step = step
        self.lr = lr
        self.loss = loss
        super().__init__(f"Non-finite loss {loss} at step {step} (lr={lr:.3e})")


class PrivilegedLeakError(PressBenchError, RuntimeError):
    """The privileged button-state channel was used on an inference path."""


class DatasetError(PressBenchError, IOError):
    """Malformed or unreadable dataset files."""
