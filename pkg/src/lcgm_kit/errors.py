"""Semantic exception hierarchy shared by all lcgm-kit modules."""


class LcgmError(Exception):
    """Base error for this package."""


class InvalidModel(LcgmError, ValueError):
    """A distribution, kernel, or model violates its construction invariants."""


class DomainMismatch(LcgmError):
    """Label sets or shapes of two objects are incompatible for an operation."""


class InvalidSystem(LcgmError, ValueError):
    """A linear feasibility system is malformed."""


class InvalidTransition(LcgmError, ValueError):
    """A transition map is not injective or not total on the required labels."""


class EnumerationBoundExceeded(LcgmError):
    """A brute-force enumeration would exceed its configured size cap."""


class PreconditionFailed(LcgmError):
    """An operation's mathematical preconditions do not hold.

    ``failed`` lists the names of the violated preconditions.
    """

    def __init__(self, failed):
        if isinstance(failed, str):
            failed = [failed]
        self.failed = tuple(failed)
        super().__init__("preconditions not met: " + ", ".join(self.failed))


class DegenerateColumn(LcgmError, ValueError):
    """A matrix column is (numerically) zero where a nonzero column is required."""


class NotInvertible(LcgmError):
    """A square matrix is singular or too ill-conditioned to treat as invertible."""


class RankDeficient(LcgmError):
    """Data or a matrix has lower rank than the operation requires."""


class InvariantViolation(LcgmError):
    """An internal mathematical invariant failed; indicates a bug or broken input."""
