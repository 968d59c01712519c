"""Exception hierarchy shared by every module of the package."""


class WLKalmanError(Exception):
    """Base class for all package errors."""


class StructureError(WLKalmanError, ValueError):
    """A matrix or vector does not have the required algebraic structure."""


class NotPSD(StructureError):
    """A covariance-type matrix has an eigenvalue below the tolerance."""


class NotAugmented(StructureError):
    """A vector's lower half is not the conjugate of its upper half."""


class Singular(WLKalmanError, ArithmeticError):
    """An inversion was requested for a (numerically) singular matrix."""


class SingularInnovation(Singular):
    pass


class SingularM(Singular):
    pass


class ZeroVariance(WLKalmanError, ValueError):
    pass


class InfeasiblePseudovariance(WLKalmanError, ValueError):
    """|pseudovariance| exceeds the variance."""


class UnstableAR(WLKalmanError, ValueError):
    pass


class MissingObservation(WLKalmanError, KeyError):
    pass


class AsymmetricAdjacency(WLKalmanError, ValueError):
    pass


class ConnectivityFailure(WLKalmanError, RuntimeError):
    pass


class InsufficientTrials(WLKalmanError, ValueError):
    pass


class ConfigurationError(WLKalmanError, ValueError):
    """Invalid scenario or filter configuration."""


class NumericalFailure(WLKalmanError, ArithmeticError):
    """Every trial of a run produced non-finite estimates."""
