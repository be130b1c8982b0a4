"""Exception hierarchy; each class maps to one CLI exit code."""


class StreamQMError(Exception):
    exit_code = 1


class ArgumentError(StreamQMError, ValueError):
    """Bad shapes, bad parameters, or inputs that violate a precondition."""

    exit_code = 2


class ConfigurationError(ArgumentError):
    """Inconsistent run configuration (e.g. resuming with a different q)."""


class StreamError(ArgumentError):
    """The chunk source is empty or changes row dimension mid-stream."""

    def __init__(self, message, chunk_index=None):
        if chunk_index is not None:
            message = f"chunk {chunk_index}: {message}"
        super().__init__(message)
        self.chunk_index = chunk_index


class FormatError(StreamQMError):
    """Malformed binary file. ``offset`` is the byte offset where parsing failed."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(StreamQMError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
