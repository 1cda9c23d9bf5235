"""Exception types shared across the package.

The CLI maps these onto exit codes: input/usage/config/shape problems exit 2,
numeric degeneracies exit 3.
"""


class SfpError(Exception):
    """Base class for every error raised by sfplab."""


class InputError(SfpError, ValueError):
    """Malformed or out-of-range input data."""


class ShapeError(InputError):
    """Operand shapes are incompatible."""


class UsageError(SfpError, ValueError):
    """An API was called in a way its contract forbids."""


class ConfigError(UsageError):
    """Invalid configuration value or unknown configuration key."""


class DegenerateError(SfpError, ArithmeticError):
    """A mathematically undefined quantity was requested (zero norm, constant ranks, ...)."""
