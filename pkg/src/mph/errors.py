"""Exception hierarchy shared by all modules."""


class MphError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(MphError, ValueError):
    pass


class DomainError(MphError, ValueError):
    """An evaluation point lies outside the support of the operation."""


class ValidationError(MphError, ValueError):
    """A model or specification violates one of its invariants.

    ``path`` names the offending field, e.g. ``"T[1][0, 0]"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class UnsupportedCaseError(MphError):
    """The requested matrix function is not available for this input."""


class NumericalError(MphError, ArithmeticError):
    """A computation underflowed or otherwise lost all accuracy."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message)
