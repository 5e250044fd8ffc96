"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
numeric invariant violations exit 3, enumeration budget overruns exit 4.
"""


class IfsdimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IfsdimError):
    """Invalid configuration file, schema violation, or bad user parameter."""


class NumericError(IfsdimError):
    """A numeric invariant failed: singular Jacobian, broken bracket,
    non-monotone pressure curve, translation leaving the domain, etc."""


class BudgetError(IfsdimError):
    """A word-enumeration or sampling budget would be exceeded."""
