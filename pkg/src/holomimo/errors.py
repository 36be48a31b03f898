"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a run configuration is malformed or inconsistent."""


class UnsupportedModelError(ValueError):
    """Raised when a builder is asked for a model variant it cannot produce."""


class AccuracyError(RuntimeError):
    """Raised when a numerical self-check fails (e.g. under-resolved quadrature)."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine fails to converge or violates its contract."""


class OracleInvalidError(RuntimeError):
    """Raised when a closed-form NMSE oracle is requested outside its validity regime."""
