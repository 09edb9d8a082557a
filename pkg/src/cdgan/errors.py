"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid architecture or training configuration."""


class InputError(ValueError):
    """Tensor arguments violate a shape or value contract."""


class DataError(RuntimeError):
    """Dataset or checkpoint files are missing, unreadable, or corrupt."""


class TrainingError(RuntimeError):
    """A training step produced non-finite losses or gradients."""


class UsageError(ValueError):
    """Bad command-line usage (maps to exit code 2)."""
