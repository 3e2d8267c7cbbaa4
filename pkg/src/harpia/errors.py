"""Exception hierarchy shared across the library, CLI, and service."""


class HarpiaError(Exception):
    """Base class for all library errors."""


class ParameterError(HarpiaError):
    """Invalid operator or tool parameters."""


class CorruptInputError(HarpiaError):
    """On-disk data does not match its declared geometry."""


class UnsupportedFormatError(HarpiaError):
    """Unknown dtype or malformed sidecar."""


class BudgetUnavailableError(HarpiaError):
    """The compute backend could not report free memory."""


class BudgetTooSmallError(HarpiaError):
    """The memory budget cannot hold even a minimal chunk."""

    def __init__(self, message, minimum_bytes=None):
        super().__init__(message)
        self.minimum_bytes = minimum_bytes


class ChunkExecutionError(HarpiaError):
    """An operator failed while processing a chunk."""

    def __init__(self, message, chunk_index):
        super().__init__(message)
        self.chunk_index = chunk_index


class JobCancelled(HarpiaError):
    """Job was cancelled at a chunk boundary; partial output discarded."""
