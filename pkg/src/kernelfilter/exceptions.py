"""Exception types raised across the package."""


class KernelFilterError(Exception):
    """Base class for all package errors."""


class DimensionError(KernelFilterError, ValueError):
    """An input array does not have the dimension the operation expects."""


class NotPositiveDefiniteError(KernelFilterError, ValueError):
    """A covariance matrix could not be Cholesky factorized."""


class DegenerateMixtureError(KernelFilterError):
    """The mixture has non-positive total mass where positive mass is required."""


class NonNormalizableError(DegenerateMixtureError):
    """normalize() was called on a mixture whose total mass is not positive."""


class SignedMixtureSamplingError(KernelFilterError):
    """sample() was called on a mixture carrying negative weights."""


class DivergenceError(KernelFilterError):
    """A trajectory or filter produced non-finite values.

    Attributes:
        step: index of the time step at which divergence was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FilterDivergenceError(DivergenceError):
    """The posterior fit could not be normalized."""


class TransportError(KernelFilterError):
    """The linear transport map is (numerically) singular; reduce the step size."""


class LocalFitError(KernelFilterError):
    """The local kernel optimization hit non-finite residuals or objective."""


class DegenerateWeightsError(KernelFilterError):
    """Every particle received zero likelihood weight."""


class OracleError(KernelFilterError):
    """The Kalman oracle met a non-SPD innovation covariance."""
