"""Exception hierarchy shared by all modules."""


class VarphaseError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(VarphaseError, ValueError):
    """An input violates a documented precondition."""


class SingularConfigurationError(VarphaseError, ArithmeticError):
    """A formula hits a (near) zero denominator."""


class AssemblyError(VarphaseError):
    """Non-finite values appeared while assembling a residual or Jacobian."""


class LinearSolveError(VarphaseError):
    """The sparse factorization failed or produced an inaccurate solution."""


class NonConvergenceError(VarphaseError):
    """Newton iteration did not reach the requested tolerance.

    Attributes
    ----------
    state : numpy.ndarray
        Last iterate.
    history : list of float
        Residual infinity-norms, one per iteration (including the initial one).
    """

    def __init__(self, message, state=None, history=None):
        super().__init__(message)
        self.state = state
        self.history = list(history) if history is not None else []


class ConfigError(VarphaseError):
    """Scenario configuration could not be parsed or validated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedWidthError(VarphaseError):
    """A profile never crosses one of the interface thresholds."""
