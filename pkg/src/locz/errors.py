"""Exception hierarchy shared by all modules."""


class LoczError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(LoczError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(LoczError, RuntimeError):
    """A computation failed or produced an inconsistent result."""


class CompatibilityError(ParameterError):
    """A Neumann source does not integrate to zero."""


class BudgetExceededError(ParameterError):
    """A transport problem is larger than the configured size budget."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before reaching its tolerance."""


class ConsistencyError(NumericalError):
    """Two routes that must agree produced different answers."""


class ResolutionError(NumericalError):
    """The discretization is too coarse for the requested quantity."""
