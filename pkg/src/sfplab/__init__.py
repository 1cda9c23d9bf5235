"""Single-forward-pass contrastive sentence embeddings on a toy decoder-only transformer."""

from .errors import ConfigError, DegenerateError, InputError, ShapeError, UsageError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DegenerateError", "InputError", "ShapeError", "UsageError", "__version__"]
