"""Exception hierarchy shared by all modules."""


class ShiftMetricError(Exception):
    """Base class for numeric failures (CLI exit code 1)."""


class DomainError(ShiftMetricError, ValueError):
    """Input outside the domain of an operation."""


class SolverError(ShiftMetricError):
    """An iterative solver failed to converge.

    ``residuals`` holds whatever diagnostic values the solver had when it
    gave up.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateEntropyError(DomainError):
    """Entropy requested on an extended length function with < 2 finite petals."""


class DegenerateBasepointError(ShiftMetricError):
    """The pairing <l, grad F(l)> vanished at a supposed unit-entropy point."""


class TooLargeError(ShiftMetricError):
    """An exhaustive enumeration would exceed its size cap."""


class AccuracyError(ShiftMetricError):
    """Quadrature did not converge; both estimates are attached."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class ClassificationUncertain(ShiftMetricError):
    """Sequence classification could not be decided from the probes."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table
