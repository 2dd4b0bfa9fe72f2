"""Exception types raised by the solvers."""


class CollapseDomainError(ValueError):
    """Coupling at or beyond the collapse point, where the squeezing
    transform that underlies the series solution is singular."""


class NoCollapseError(ValueError):
    """Requested a collapse point for a model that has none."""


class PoleProximityError(ArithmeticError):
    """Energy too close to a pole of the recurrence."""

    def __init__(self, message, pole_index=None, distance=None):
        super().__init__(message)
        self.pole_index = pole_index
        self.distance = distance


class SeriesConvergenceError(ArithmeticError):
    """G-function series did not meet its tail criterion."""


class SelfOrthogonalError(ArithmeticError):
    """Left and right eigenvectors are (numerically) orthogonal, which
    happens at an exceptional point."""


class EigensolverError(RuntimeError):
    """Dense eigendecomposition failed its residual check."""
