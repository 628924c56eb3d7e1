"""Exception hierarchy shared across the package."""


class TqdiffError(Exception):
    pass


class ParameterError(TqdiffError, ValueError):
    """One or more parameter invariants are violated."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DomainError(TqdiffError, ValueError):
    """A formula was called outside the regime where it is defined."""


class NumericError(TqdiffError, ArithmeticError):
    """A numerical procedure failed; ``state`` carries the last good state if any."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
