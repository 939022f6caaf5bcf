"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class UnsupportedOperation(NotImplementedError):
    """Operation not provided for this model or shape variant."""


class DegenerateInputError(ValueError):
    """Geometry too degenerate to evaluate (zero-length edges, hairpins)."""


class UsageError(ValueError):
    """Field or argument supplied on the wrong stratum."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConsistencyError(RuntimeError):
    """An internal invariant (monotonicity, bookkeeping) was violated."""
