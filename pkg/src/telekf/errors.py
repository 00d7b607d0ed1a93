"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class TelekfError(Exception):
    """Base class for toolkit errors."""


class ConfigError(TelekfError):
    """Bad usage or configuration (missing keys, invalid values)."""


class DataError(TelekfError):
    """Malformed or insufficient data (bad files, non-finite values, shapes)."""


class NumericalError(TelekfError):
    """Numerical failure (degenerate decompositions, singular solves)."""
