"""Exception hierarchy shared by every module.

All failures carry enough context (time, station, offending value) for a
driver to report exactly where and why a run stopped.
"""


class PrandtlLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PrandtlLabError):
    """Invalid grid sizes, parameter combinations, or config files."""


class DataError(PrandtlLabError):
    """Initial or boundary data violating a solver precondition."""


class DomainError(PrandtlLabError):
    """Argument outside the mathematical domain of an operation."""


class UsageError(PrandtlLabError):
    """API misuse: mismatched inputs, short windows, empty series."""


class StepError(PrandtlLabError):
    """A single step cannot be taken (CFL violation, bad characteristic)."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class BlowUpError(PrandtlLabError):
    """Solution left the admissible range; carries the failure time."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DegeneracyError(PrandtlLabError):
    """Vorticity or density lower bound violated; carries the minimum."""

    def __init__(self, message, minimum=None):
        super().__init__(message)
        self.minimum = minimum


class LifeSpanExceeded(PrandtlLabError):
    """A monitored bound failed mid-march; carries the station/time."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class IterationDivergenceError(PrandtlLabError):
    """Picard iteration stopped contracting."""


class ConstructionError(PrandtlLabError):
    """Data builder could not satisfy its post-conditions."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class OverflowNormError(PrandtlLabError):
    """A norm evaluation produced a non-finite value."""
