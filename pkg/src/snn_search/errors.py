"""
Exception hierarchy. Everything except ``UsageError`` is a ``ValueError``,
so library callers can catch that generically.
"""


class SnnError(Exception):
    """Root of all errors raised by snn_search."""


class ParameterError(SnnError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DataError(SnnError, ValueError):
    """Input data cannot be used (empty, non-finite, wrong shape)."""


class DimensionMismatchError(DataError):
    """Two operands disagree in their feature dimension."""

    def __init__(self, expected: int, got: int, what: str = "vector"):
        super().__init__(
            f"dimension mismatch: expected {what} of dimension {expected}, got {got}"
        )
        self.expected = expected
        self.got = got


class FormatError(DataError):
    """A file on disk does not follow the expected format."""


class UsageError(SnnError):
    """The command line could not be parsed."""
