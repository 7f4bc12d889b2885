"""Exception types shared across the toolkit."""


class TelegraphError(Exception):
    """Base class for all toolkit errors."""


class GraphLookupError(TelegraphError, KeyError):
    """Raised when a node id is not present in a graph."""


class PersistenceError(TelegraphError):
    """Raised when saving or loading an artifact fails; carries path and cause."""

    def __init__(self, path, cause):
        super().__init__(f"persistence failure at {path}: {cause}")
        self.path = str(path)
        self.cause = cause


class ShapeError(TelegraphError, ValueError):
    """Raised on incompatible matrix/vector shapes; names both shapes."""


class ProviderError(TelegraphError):
    """Raised when the remote embedding provider fails after retries.

    ``failed_indices`` are the positions (within the requested batch) whose
    vectors could not be obtained.
    """

    def __init__(self, message, failed_indices):
        super().__init__(message)
        self.failed_indices = list(failed_indices)


class UndefinedSimilarityError(TelegraphError, ValueError):
    """Cosine similarity is undefined (zero vector)."""


class UndefinedPrecisionError(TelegraphError, ValueError):
    """Weak precision is undefined because no pair has been adjudicated."""


class TrainingError(TelegraphError, RuntimeError):
    """Raised when training cannot proceed (single-class data, non-finite loss)."""


class StageError(TelegraphError, RuntimeError):
    """Raised when a pipeline stage cannot run; names the missing upstream stage."""
