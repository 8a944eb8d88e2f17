"""Exception types shared across the pipeline.

The CLI maps these onto process exit codes, so each one belongs to exactly
one of the config / data / numerical families.
"""

from __future__ import annotations


class GaitkalError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(GaitkalError, ValueError):
    """Invalid configuration, arguments, or experiment setup."""

    exit_code = 2


class DataError(GaitkalError, ValueError):
    """Input data that cannot be used (malformed, inconsistent, degenerate)."""

    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    def __init__(self, message: str, row: int | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DegenerateInputError(DataError):
    def __init__(self, message: str, index: int | None = None) -> None:
        self.index = index
        if index is not None:
            message = f"sample {index}: {message}"
        super().__init__(message)


class NumericalError(GaitkalError, ArithmeticError):
    """A numerical routine failed (singular matrix, non-finite result)."""

    exit_code = 4


class CalibrationError(NumericalError):
    """A calibration search did not produce a usable value."""
