"""Exception types shared across the library."""


class AssocLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(AssocLabError, ValueError):
    pass


class InvalidParameterError(AssocLabError, ValueError):
    pass


class DimensionMismatchError(AssocLabError, ValueError):
    pass


class CountOverflowError(AssocLabError, OverflowError):
    """An exact integer result exceeds the supported 128-bit width."""


class BudgetExceededError(AssocLabError, RuntimeError):
    """Subset enumeration would exceed the configured budget."""


class CapacityCapError(AssocLabError, ValueError):
    """A capacity formula evaluates beyond the configured hard cap."""


class ConventionError(AssocLabError, RuntimeError):
    """Field vector and threshold use different counting conventions."""


class AmbiguousComparisonError(AssocLabError, RuntimeError):
    """A log-space field/threshold comparison landed inside the tolerance band."""


class ConfigError(AssocLabError, ValueError):
    """Bad, missing, or unknown experiment configuration key/value."""


class TrialError(AssocLabError, RuntimeError):
    """A Monte Carlo trial failed; the message carries the cell context."""
