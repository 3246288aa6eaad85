"""Exception types raised across the package."""


class MagnlsError(Exception):
    pass


class GridMismatchError(MagnlsError, ValueError):
    """Two fields that must share a grid do not."""


class DomainError(MagnlsError, ValueError):
    """An argument lies outside the domain of the operation."""


class TableRangeError(DomainError):
    """A reduced-energy lookup fell outside the tabulated field range."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class SupportOverflowError(DomainError):
    """A rescaled profile does not fit inside the target domain."""


class ConvergenceError(MagnlsError, RuntimeError):
    """A solver failed where the caller required success."""
