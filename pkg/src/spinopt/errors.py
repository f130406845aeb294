"""Exception types shared across the package."""


class SpinoptError(Exception):
    """Base class for all package errors."""


class FieldFormatError(SpinoptError):
    """Raised when a CSV grid file cannot be parsed; message names row/column."""


class ExcludedSensorError(SpinoptError):
    """A sensor sits at a dead point of its protocol and contributes no signal."""


class EmptyRegionError(SpinoptError):
    """A requested region contains no pixels."""


class ConfigError(SpinoptError):
    """Invalid or unknown configuration keys/values."""
