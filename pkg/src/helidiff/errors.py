"""Exception hierarchy shared by all helidiff modules."""


class HelidiffError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(HelidiffError):
    """Invalid configuration or unknown catalog name (CLI exit code 2)."""


class ContractViolation(HelidiffError):
    """An operation was called with arguments violating its contract."""


class NotApplicableError(HelidiffError):
    """Requested diagnostic is undefined for this operator (e.g. closure
    test on an odd-dimensional or singular operator)."""


class NumericalFailureError(HelidiffError):
    """A run exceeded its numerical-sanity budget (CLI exit code 3)."""
