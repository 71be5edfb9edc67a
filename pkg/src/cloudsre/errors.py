"""Exception hierarchy shared by every cloudsre module."""


class CloudSREError(Exception):
    """Base class for all errors raised by cloudsre."""


class DomainError(CloudSREError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class QuadratureError(CloudSREError, ArithmeticError):
    """Numerical integration did not reach the requested accuracy."""


class NonSummableError(CloudSREError, ArithmeticError):
    """The coefficient product never fell below tolerance within ``k_max`` terms."""


class NumericAnomalyError(CloudSREError, ArithmeticError):
    """Floating-point behaviour that is measure-zero in theory happened too often."""


class DegenerateSampleError(CloudSREError, ValueError):
    """Sample has zero variance, so normalized moments are undefined.

    The mean and variance are still available on the exception.
    """

    def __init__(self, message, mean, variance):
        super().__init__(message)
        self.mean = mean
        self.variance = variance


class DivergenceError(NumericAnomalyError):
    """A recursion exceeded the divergence threshold where a scalar result was required."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
