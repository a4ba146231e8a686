"""Exception types raised by this package.

Keeping these distinct lets callers (and the command line driver) tell
apart bad input data, bad configuration and numerically unstable
searches without parsing message strings.
"""


class DcmError(Exception):
    """Base class for all errors raised by this package."""


class DataError(DcmError):
    """Malformed or invalid time series data (parse or validation failure)."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
            if line is not None:
                loc = f"{path}:{line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class ConfigError(DcmError):
    """Invalid configuration value, control file entry or argument."""


class UnstableSearchError(DcmError):
    """The search cannot proceed, e.g. no ordered frequency tuple exists."""
