"""Exception types shared across the package.

CLI exit codes: ConfigError -> 2, numerical/domain failures -> 3,
reproduction-check failures -> 4.
"""


class IonClockError(Exception):
    """Base class for all package errors."""


class ConfigError(IonClockError):
    """Bad configuration: unparseable file, unknown key, Nyquist violation."""


class DomainError(IonClockError):
    """An argument is outside the mathematical domain of an operation."""


class InsufficientDataError(DomainError):
    """Not enough samples to run an estimator."""


class CoverageError(DomainError):
    """A laser trace does not cover the requested pulse window."""


class SelectionRuleError(DomainError):
    """A pulse addresses a quadrupole-forbidden transition (|dm| > 2)."""


class DegenerateDataError(DomainError):
    """Fit input carries no information (e.g. all contrasts equal)."""


class ClockUnlockError(IonClockError):
    """The clock servo slewed at its limit for too many consecutive cycles."""

    def __init__(self, message, cycle=None, correction_hz=None):
        super().__init__(message)
        self.cycle = cycle
        self.correction_hz = correction_hz
