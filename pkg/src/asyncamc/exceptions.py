"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (formats, pulse, experiment keys)."""


class ContractViolation(ValueError):
    """An argument violates an operation precondition."""


class NumericalError(ArithmeticError):
    """A likelihood or estimator produced a non-finite value.

    The ``state`` attribute carries whatever diagnostic context the raiser had.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}


class DegeneratePosteriorError(NumericalError):
    """Posterior statistics cannot support an amplitude update."""
