"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """An argument is outside the domain of the operation."""


class PreconditionError(ValueError):
    """The instance does not satisfy an operation's precondition (e.g. overload)."""


class SizeError(ValueError):
    """An exhaustive computation was requested above its enumeration cap."""


class NumericalError(RuntimeError):
    """An iterative solver failed to converge."""
