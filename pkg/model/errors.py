class LabError(Exception):
    """
    Base class for every failure raised by the lab.

    Attributes:
        exit_code (int): Process exit status the CLI maps this error to.
    """
    exit_code = 1


class NumericFailure(LabError):
    """A numerical invariant or solver failed (exit 1)."""
    exit_code = 1


class DomainError(NumericFailure):
    """A state left the tolerated [-0.1, 1.1] band, which signals solver blow-up."""


class BadArguments(LabError):
    """Invalid parameters or inputs (exit 2)."""
    exit_code = 2


class BudgetExhausted(LabError):
    """
    A time, search or memory budget ran out before a certificate was obtained (exit 3).

    Attributes:
        bracket (tuple[float, float] | None): Best certified bracket reached, if any.
    """
    exit_code = 3

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        """
        Initialize the error.

        Args:
            message (str): Human readable diagnostic.
            bracket (tuple[float, float] | None): (L_lo, L_hi) achieved before giving up.
        """
        super().__init__(message)
        self.bracket = bracket


class NotConverged(NumericFailure):
    """
    An outer iteration used its budget without meeting its convergence test (exit 1).

    Attributes:
        best (object | None): Best iterate reached, for reporting.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
