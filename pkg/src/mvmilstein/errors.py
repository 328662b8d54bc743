"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all mvmilstein errors."""


class ConfigError(Error):
    """Raised when a run configuration is malformed or inconsistent."""


class ShapeError(Error):
    """Raised on dimension mismatches between states, models and noise."""
