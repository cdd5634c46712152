"""Exception types shared across the package."""


class ConvergenceError(ArithmeticError):
    """A series or tail quadrature did not converge within its budget."""


class GridMismatchError(ValueError):
    """Two sampled objects that must share a grid do not."""


class StabilityError(ValueError):
    """The time step violates the monotonicity bound of the explicit scheme."""


class NumericalFailure(ArithmeticError):
    """Non-finite values appeared during time stepping.

    ``node`` holds ``(time_index, space_index)`` of the first offending value.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class InsufficientResolution(ValueError):
    """A cylinder at the requested depth holds too few grid nodes."""


class HypothesisViolation(ValueError):
    """Input data does not satisfy the growth or normalization hypotheses."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


class SweepAborted(RuntimeError):
    """An individual solve in a parameter sweep failed.

    ``partial`` holds the reports completed before the failure and ``cause``
    the original exception.
    """

    def __init__(self, message, partial, cause):
        super().__init__(message)
        self.partial = partial
        self.cause = cause
