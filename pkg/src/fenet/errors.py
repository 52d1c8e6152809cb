"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class FenetError(Exception):
    """Base class for all package errors."""


class GridMismatchError(FenetError):
    """Two functions live on incompatible discretizations."""


class ConfigError(FenetError):
    """Invalid configuration or hyperparameter values."""


class DataError(FenetError):
    """Malformed or inconsistent input data."""


class NumericalError(FenetError):
    """A numerical routine failed (non-PD system, non-finite objective, ...)."""
