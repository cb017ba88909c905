"""Exception types shared across the package."""


class FreediagError(Exception):
    """Base class."""


class ParameterError(FreediagError, ValueError):
    """Invalid model or operation parameters."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class BudgetExceeded(FreediagError, RuntimeError):
    """An enumeration or expansion would exceed its configured cap."""


class ConvergenceError(FreediagError, RuntimeError):
    """A fixed-point iteration hit its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
