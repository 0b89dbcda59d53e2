"""Exception hierarchy shared by the whole package.

Every error carries an ``exit_code`` so the command line layer can map
failures onto a stable process status: 1 for usage/configuration problems,
2 for bad input data, 3 for numerical failures.
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class FaedUqError(Exception):
    """Base class for all errors raised by faeduq."""

    exit_code = EXIT_CONFIG


class ConfigError(FaedUqError):
    """Invalid configuration value or inconsistent architecture."""

    exit_code = EXIT_CONFIG


class DataError(FaedUqError):
    """Malformed or inconsistent input data."""

    exit_code = EXIT_DATA


class PpmParseError(DataError):
    """Malformed PPM byte stream; remembers where parsing stopped."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DimensionError(DataError):
    """Shape or symmetry contract violation on an array argument."""


class InsufficientDataError(DataError):
    """Too few samples to compute the requested statistic."""


class NumericalError(FaedUqError):
    """Numerical failure (non-PSD matrix, divergence, non-convergence)."""

    exit_code = EXIT_NUMERICAL


class NotPsdError(NumericalError):
    """Matrix expected to be positive semi-definite is not."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(f"{message} (offending eigenvalue {eigenvalue!r})")
        self.eigenvalue = eigenvalue


class TrainingDivergedError(NumericalError):
    """Training produced a non-finite loss or gradient."""
