"""Exception types raised by the solver stack."""


class TriOFMError(Exception):
    """Base class for all package errors."""


class ConfigError(TriOFMError, ValueError):
    """Invalid solver, problem or CLI configuration."""


class DimensionError(TriOFMError, ValueError):
    """Operator and block vector shapes do not agree."""


class EigenConvergenceError(TriOFMError, RuntimeError):
    """The small dense Jacobi eigensolver did not converge."""

    def __init__(self, message, sweeps):
        super().__init__(message)
        self.sweeps = sweeps


class SingularBlockError(TriOFMError, ArithmeticError):
    """A Gram matrix X^T X is numerically singular (rank-deficient X)."""


class DegeneratePolynomialError(TriOFMError, ValueError):
    """Linesearch polynomial has no usable coefficients (zero direction)."""


class DivergenceError(TriOFMError, RuntimeError):
    """The iterate blew up or became non-finite."""

    def __init__(self, message, last_row=None):
        super().__init__(message)
        self.last_row = last_row


class RateFitError(TriOFMError, ValueError):
    """Too few trace rows in the linear convergence regime to fit a rate."""
