"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameters outside the region where an operation is defined."""


class DegenerateParameterError(DomainError):
    """A denominator vanishes for the requested parameters."""


class SingularityError(ArithmeticError):
    """Evaluation at tied coordinates or on the boundary of [-1, 1]."""


class NumericError(RuntimeError):
    """An iterative method failed to converge or a step could not be completed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
