"""Exception types shared across the package."""

from .tensor import ContractError, DimensionError

__all__ = ["ContractError", "DimensionError", "FormatError", "DataError", "TrainingDivergedError"]


class FormatError(ValueError):
    """A binary container is malformed; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class DataError(ValueError):
    """A dataset is unusable for the requested operation (empty split, bad channels, ...)."""


class TrainingDivergedError(RuntimeError):
    """The loss or a gradient became non-finite.  ``best_state`` holds the last good checkpoint."""

    def __init__(self, message: str, step: int, best_state=None):
        super().__init__(message)
        self.step = step
        self.best_state = best_state
