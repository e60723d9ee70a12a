"""Exception hierarchy shared by all sloscale modules."""

from __future__ import annotations


class SloScaleError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SloScaleError, ValueError):
    """Input is well-formed but violates a precondition."""


class InsufficientData(ValidationError):
    pass


class NonPositiveLatency(ValidationError):
    pass


class DuplicateId(ValidationError):
    pass


class Infeasible(SloScaleError):
    """No (cores, batch) pair satisfies the latency and rate constraints."""


class ScenarioInvalid(ValidationError):
    pass


class EmptyTrace(ValidationError):
    pass


class NonMonotonicTime(ValidationError):
    pass


class NonPositiveBandwidth(ValidationError):
    pass


class ParseError(SloScaleError, ValueError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
