"""Exception hierarchy. The CLI maps these to exit code 2."""


class PhoenixError(Exception):
    """Base class for all package errors."""


class DataError(PhoenixError, ValueError):
    """Input data is malformed, empty, or inconsistent."""


class FitError(PhoenixError, RuntimeError):
    """The optimizer could not produce a usable model."""
