"""Exception hierarchy.

ConfigError maps to CLI exit code 1, DataError and its subclasses to exit
code 2. Programming-contract violations raise plain ValueError and are not
caught by the CLI.
"""


class LidkitError(Exception):
    """Base class for all package errors."""


class ConfigError(LidkitError):
    """Invalid configuration: bad flag value, malformed config key, bad grid."""


class DataError(LidkitError):
    """Problem with input data or stored artifacts."""


class ParseError(DataError):
    """Malformed corpus file (bad line structure, invalid UTF-8)."""


class TrainingError(DataError):
    """Training inputs unusable, or a value queried from an untrained model."""


class ModelFormatError(DataError):
    """Model file rejected: version mismatch, checksum failure, truncation."""


class ConsistencyError(DataError):
    """Model counts would be driven into an impossible state (underflow)."""
