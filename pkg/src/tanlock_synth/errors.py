class ConfigError(ValueError):
    """Invalid configuration value or cross-field combination."""


class DomainError(ValueError):
    """Argument outside the domain of a formula."""


class UnlockedError(RuntimeError):
    """Raised when a measurement needs a locked trace and the trace never locked."""
