"""Exception hierarchy shared by every module.

The CLI maps :class:`NumericalError` to exit code 3 and every other
:class:`ThaOtdrError` to exit code 2.
"""


class ThaOtdrError(Exception):
    """Base class for all package errors."""


class DomainError(ThaOtdrError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(ThaOtdrError, ValueError):
    """A query falls outside the measured range (no extrapolation)."""


class ValidationError(ThaOtdrError, ValueError):
    """Input data violates a physical or structural invariant."""


class ConfigurationError(ThaOtdrError, ValueError):
    """A configuration is inconsistent, incomplete or unreadable."""


class RangeAmbiguityError(ThaOtdrError, ValueError):
    """A reflector lies beyond the unambiguous range of the pulse train."""


class NumericalError(ThaOtdrError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class FitFailure(NumericalError):
    """Connector fit did not converge to an acceptable solution.

    The partially fitted result, if any, is available as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
