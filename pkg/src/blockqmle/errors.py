"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration values."""


class DataError(ValueError):
    """Observation data unusable for the requested operation."""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond its recovery policy."""


class EstimationError(RuntimeError):
    """All estimation attempts failed; carries diagnostics when available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
