"""Error taxonomy shared across the package."""


class InputError(ValueError):
    """Bad argument to an operation (wrong range, non-finite, malformed)."""


class ModelError(ValueError):
    """Inconsistent reference-model parameters (e.g. non-PSD covariance)."""


class DataError(ValueError):
    """Non-finite or otherwise unusable numerical data mid-computation."""


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown key, violated invariant)."""
