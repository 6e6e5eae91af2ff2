"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class SolverError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInput(SolverError):
    pass


class DecompositionFailure(SolverError):
    pass


class DualDomainExceeded(SolverError):
    """``c - B(s)`` left the slope box on which the conjugate is represented."""


class NoMinimizer(SolverError):
    """The dual supremum is not attained inside the represented dual domain.

    ``verdict`` carries the growth classification when the caller knows it.
    """

    def __init__(self, message: str, verdict: str | None = None):
        super().__init__(message)
        self.verdict = verdict


class InfeasibleSelection(SolverError):
    pass


class ComboMismatch(SolverError):
    pass


class CertificateFailure(SolverError):
    """The recovered trajectory does not meet the optimality certificate.

    The full report is attached so callers can still inspect the run.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class InfeasibleGrid(SolverError):
    pass


class ProblemFileError(SolverError):
    """Validation error in a problem file; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
