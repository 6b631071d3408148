"""Exception hierarchy.

The CLI maps these onto exit codes: config/parse errors exit 2, data
errors exit 3, math/domain errors exit 4, aborted experiments exit 5.
"""


class WeightAllocError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 4


class InvalidSpecError(WeightAllocError, ValueError):
    """A weight, model or experiment description is malformed."""

    exit_code = 2


class DataError(WeightAllocError, ValueError):
    """Input sample is empty, ragged or contains non-finite values."""

    exit_code = 3


class DomainError(WeightAllocError, ValueError):
    """Argument outside the mathematical domain (e.g. t not in (0, 1))."""


class DivergenceError(WeightAllocError, ArithmeticError):
    """A quadrature or discretised integral failed to stabilise."""


class ZeroDenominatorError(WeightAllocError, ZeroDivisionError):
    """Weights vanish on the whole sample, or the weight integral is zero."""


class UnsupportedModelError(WeightAllocError, NotImplementedError):
    """The model kind does not provide the requested curve."""


class InferenceUnsafeError(DomainError):
    """Model lacks a finite second moment, so asymptotic variance is undefined."""


class SampleTooSmallError(DataError):
    pass


class ZeroVarianceError(WeightAllocError, ArithmeticError):
    """Asymptotic variance is zero; standardisation is undefined."""


class ExperimentAbort(WeightAllocError, RuntimeError):
    """Too many replications failed."""

    exit_code = 5
