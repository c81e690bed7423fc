"""Exception hierarchy shared by all solvers."""


class CogBeamError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(CogBeamError, ValueError):
    """Invalid scenario or sweep configuration."""


class NumericalFailure(CogBeamError, ArithmeticError):
    """An eigensolver or SVD did not converge, or an internal consistency
    check failed by more than round-off."""


class RankError(CogBeamError):
    """More data streams were requested than the effective channel supports."""


class InsufficientNullSpace(CogBeamError):
    """Zero forcing needs at least ``d`` spare dimensions orthogonal to the
    primary receiver; the channel does not have them."""


class InfeasibleError(CogBeamError):
    """The interference cap is below the minimum achievable interference.

    Parameters
    ----------
    xi : float
        The requested interference cap.
    xi_min : float
        The minimum achievable interference for the SNR targets.
    """

    def __init__(self, xi, xi_min):
        self.xi = float(xi)
        self.xi_min = float(xi_min)
        super().__init__(
            f"interference cap {self.xi:.6g} is below the minimum "
            f"achievable interference {self.xi_min:.6g}")


class ToleranceError(CogBeamError):
    """An iterative search could not reach its tolerance."""


class OracleNoFeasiblePoint(CogBeamError):
    """The random Stiefel oracle found no point meeting the interference cap."""
