"""Exception types shared across the package."""


class NudgeError(Exception):
    """Base class for all package errors."""


class InvalidInput(NudgeError, ValueError):
    """An argument violates a documented precondition."""


class OFFParseError(NudgeError, ValueError):
    """Malformed OFF data; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(NudgeError):
    """Parameter arrays and architecture descriptor disagree."""


class NumericError(NudgeError):
    """A computation produced non-finite values."""
