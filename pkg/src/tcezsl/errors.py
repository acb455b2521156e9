from typing import ClassVar


class TceError(Exception):
    """Base class of every error raised by tcezsl."""

    #: process exit status used by the command line tool
    exit_code: ClassVar[int] = 1


class ShapeError(TceError, ValueError):
    """Array dimensions do not agree."""
    exit_code = 2


class PreconditionError(TceError, ValueError):
    """An operation was called in a state it does not support."""
    exit_code = 2


class ConfigError(TceError, ValueError):
    exit_code = 2


class FormatError(TceError, ValueError):
    """A word-vector, manifest or checkpoint file is malformed."""
    exit_code = 2


class DataValidationError(TceError, ValueError):
    exit_code = 2


class NumericError(TceError, ArithmeticError):
    """A non-finite value appeared during training or optimisation."""
    exit_code = 3

    def __init__(self, message: str, term: str = '') -> None:
        super(NumericError, self).__init__(message)
        self.term = term


class CompatibilityError(TceError, ValueError):
    """A checkpoint does not match the dataset it is applied to."""
    exit_code = 4
