"""Exception types shared across the package."""


class DatasetError(Exception):
    """A dataset on disk is missing, malformed, or inconsistent."""


class NumericalError(RuntimeError):
    """Training or checking produced a non-finite or invalid numerical result."""
