"""Exception hierarchy shared by the solver modules and the CLI."""


class SpiralFlowError(Exception):
    """Base class for all errors raised by spiralflow."""


class DomainError(SpiralFlowError, ValueError):
    """A pointwise kernel was evaluated outside its domain of validity."""


class ConfigError(SpiralFlowError, ValueError):
    """A configuration value violates a module precondition."""


class UsageError(SpiralFlowError, ValueError):
    """An operation was called with insufficient or malformed input."""


class NumericalError(SpiralFlowError, RuntimeError):
    """Base class for failures of a numerical procedure."""


class StiffnessError(NumericalError):
    """The ODE integrator could not advance (step size underflow)."""

    def __init__(self, message, x=None, state=None):
        super().__init__(message)
        self.x = x
        self.state = state


class ShootingUnresolved(NumericalError):
    """A shooting trajectory reached the horizon without a classification."""


class BracketError(NumericalError):
    """Both ends of the lambda bracket classify the same way."""


class ProfileInvariantError(NumericalError):
    """The assembled steady profile violates one of its proven inequalities."""

    def __init__(self, message, check=None, node=None):
        super().__init__(message)
        self.check = check
        self.node = node


class FitError(NumericalError):
    """The asymptotic-constant extrapolation did not converge."""


class BlowupError(NumericalError):
    """A time step produced non-finite values."""

    def __init__(self, message, node=None, t=None):
        super().__init__(message)
        self.node = node
        self.t = t


class NotConverged(NumericalError):
    """No rotating-wave period was detected before the time limit."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
