"""Error hierarchy shared by every simulation module.

`ConfigError` and `DomainError` describe bad input (CLI exit code 2);
`NumericError` and its subclasses describe a computation that could not
be completed to the requested accuracy (CLI exit code 3).
"""

from __future__ import annotations


class BandEdgeError(RuntimeError):
    pass


class ConfigError(BandEdgeError):
    pass


class DomainError(BandEdgeError, ValueError):
    pass


class NumericError(BandEdgeError):
    pass


class SingularKernelError(DomainError):
    """Raised when a delta-function kernel is sampled pointwise."""


class IntegratorInstabilityError(NumericError):
    pass


class StepSizeError(NumericError):
    pass


class SearchError(NumericError):
    pass


class CalibrationError(NumericError):
    pass


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit status."""
    if isinstance(error, NumericError):
        return EXIT_NUMERIC
    return EXIT_CONFIG
