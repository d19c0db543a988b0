"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates a structural requirement."""


class NonFiniteError(ArithmeticError):
    """A forward or backward pass produced NaN or Inf."""


class DegenerateEmbeddingError(ValueError):
    """An embedding with zero norm reached a cosine-based relation score."""


class ManifestError(ValueError):
    """A dataset manifest entry failed validation."""


class CheckpointError(ValueError):
    """A checkpoint file is missing, corrupt, or from an unknown version."""
