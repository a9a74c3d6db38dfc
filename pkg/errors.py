"""Exception hierarchy shared by every betakit module."""


class BetakitError(Exception):
    """Base class for every error raised on purpose by betakit."""


class DomainError(BetakitError, ValueError):
    """An argument violates an operation's precondition."""


class OutOfRangeError(DomainError, IndexError):
    pass


class CountOverflowError(BetakitError, OverflowError):
    pass


class BoundaryUndetermined(BetakitError):
    """A digit floor or comparison could not be decided at the precision cap.

    Args:
        index: 1-based position of the offending digit (or depth).
        bits: working precision at which the decision was abandoned.
    """

    def __init__(self, message, index=None, bits=None):
        super().__init__(message)
        self.index = index
        self.bits = bits


class CertificationError(BetakitError):
    pass


class ConstructionError(BetakitError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NotCloseEnoughError(ConstructionError):
    """The two base parameters are too far apart for the construction."""

    def __init__(self, message, gap):
        super().__init__(message, {"gap": gap})
        self.gap = gap


class BoundaryError(BetakitError):
    pass
