"""Exception types shared across the package.

The CLI maps these onto exit codes, so new failure modes should reuse one
of the classes below rather than raising bare ValueError.
"""


class BlmError(Exception):
    """Base class for all package errors."""


class DataError(BlmError):
    """Malformed or invalid dataset content (parse/validation failures)."""


class StoreError(BlmError):
    """Embedding store or checkpoint file format/integrity failure."""


class ShapeError(BlmError):
    """Tensor or layer shape mismatch."""


class ConfigError(BlmError):
    """Invalid configuration value (latent spec, noise scale, tau, ...)."""


class NumericError(BlmError):
    """Non-finite values where finite ones are required (loss, gradients)."""
