"""Exception types shared across the package."""


class PdstlError(Exception):
    """Base class for all package errors."""


class FormatError(PdstlError, ValueError):
    """A file does not follow the expected on-disk layout."""


class ConfigError(PdstlError, ValueError):
    """Invalid configuration or unusable data (e.g. a single-class training set)."""


class DegenerateNeighborhoodError(PdstlError, ValueError):
    """A Loess neighborhood has too few weighted points for the requested degree."""
