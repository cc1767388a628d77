"""Exception types raised across the package.

Every error carries a stable class name; the CLI prints that name on stderr
so scripts can match on it.
"""

from __future__ import annotations


class DebiasLassoError(Exception):
    """Base class for all package errors."""


class ValidationError(DebiasLassoError, ValueError):
    """An input violates an operation's precondition."""


class NotSPD(ValidationError):
    pass


class DiagonalTooLarge(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class BadSparsity(ValidationError):
    pass


class BadAlpha(ValidationError):
    pass


class EmptySupport(ValidationError):
    pass


class ModelTooLarge(ValidationError):
    pass


class DegenerateFit(DebiasLassoError):
    """The scaled Lasso interpolated the data (noise estimate collapsed).

    ``theta_hat`` holds the last coefficient iterate.
    """

    def __init__(self, message: str, theta_hat=None):
        super().__init__(message)
        self.theta_hat = theta_hat


class TauNonPositive(DebiasLassoError):
    """A node-wise residual variance came out nonpositive."""

    def __init__(self, index: int, value: float):
        super().__init__(
            f"node-wise tau^2 for column {index} is {value:.3e} <= 0; "
            "increase lambda_tilde"
        )
        self.index = index
        self.value = value


class RankDeficient(DebiasLassoError):
    pass


class DidNotConverge(UserWarning):
    """Emitted (as a warning) when a solver stops at max_iter above tolerance."""
