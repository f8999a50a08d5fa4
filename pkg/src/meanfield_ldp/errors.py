"""Exception hierarchy shared by all modules."""


class MeanFieldError(Exception):
    """Base class for library errors."""


class IncompatibleSpaceError(MeanFieldError, ValueError):
    """Operands live in spaces of different dimension or on different grids."""


class UnsupportedDimensionError(MeanFieldError, ValueError):
    """Operation only implemented for a particular dimension (usually d = 1)."""


class InvalidOrderError(MeanFieldError, ValueError):
    """Order / growth index below the admissible range."""


class InvalidArgumentError(MeanFieldError, ValueError):
    """Nonpositive budget, malformed parameter or violated precondition."""


class ConvergenceError(MeanFieldError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance.

    Attributes:
        residual: last measured residual.
        iterations: number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergedChainError(MeanFieldError, RuntimeError):
    """A Markov chain produced non-finite positions (step size too large)."""

    def __init__(self, message, step=-1):
        super().__init__(message)
        self.step = step


class InsufficientDataError(MeanFieldError, ValueError):
    """Estimator called with an empty or too small sample."""


class ConfigError(MeanFieldError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
