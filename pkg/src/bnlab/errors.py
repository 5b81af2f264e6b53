"""Shared exception types."""


class TrainingFault(RuntimeError):
    """Raised when a training step produces non-finite values.

    Carries the step index (filled in by the training loop) so harness
    code can log where a run diverged instead of crashing the process.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConfigError(ValueError):
    """Raised for invalid experiment configuration, naming the bad field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
