"""Exception hierarchy shared across the package."""


class DSMError(Exception):
    """Base class for all errors raised by dsmflow."""


class NonFiniteInput(DSMError, ValueError):
    """A vector or matrix handed to an operation contains NaN or Inf."""


class NonFiniteOutput(DSMError, FloatingPointError):
    """The operator (or its Jacobian) produced NaN or Inf."""


class SingularMatrix(DSMError, ArithmeticError):
    """A factorization detected (numerical) rank deficiency."""

    def __init__(self, message, rcond=0.0):
        super().__init__(message)
        self.rcond = rcond


class InvalidSchedule(DSMError, ValueError):
    pass


class InvalidConfig(DSMError, ValueError):
    pass


class NoConvergence(DSMError, RuntimeError):
    """An inner iteration hit its cap. ``a`` carries the regularization
    parameter in use, when there is one."""

    def __init__(self, message, a=None, residual=None):
        super().__init__(message)
        self.a = a
        self.residual = residual


class NotInRange(DSMError, ValueError):
    pass


class UnknownProblem(DSMError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown problem"


class InsufficientSamples(DSMError, ValueError):
    pass
