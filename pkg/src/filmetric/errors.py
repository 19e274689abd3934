"""Exception types shared across the toolkit.

The CLI maps these onto distinct exit codes, so raising the right class
matters more than the message text.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad parameters, infeasible constraints, bad flags."""


class DataIOError(OSError):
    """File-level failure: missing/corrupt inputs, checksum mismatches."""


class NumericalError(RuntimeError):
    """A numerical invariant was violated (non-finite values, energy increase)."""
