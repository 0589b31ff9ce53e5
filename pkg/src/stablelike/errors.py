"""Exception types shared by all modules."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericalFailure(RuntimeError):
    """A quadrature, iteration or simulation did not reach its tolerance."""

    def __init__(self, message, residual=None, report=None):
        super().__init__(message)
        self.residual = residual
        self.report = report


class DivergenceError(NumericalFailure):
    """An iteration whose increments grew instead of contracting."""


class InvariantViolation(NumericalFailure):
    """A structural invariant (monotonicity, bi-Lipschitz band, ...) failed."""
