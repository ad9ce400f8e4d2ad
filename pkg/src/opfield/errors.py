"""Exception taxonomy shared across the package."""


class OpFieldError(Exception):
    """Base class for all package-specific errors."""


class InvalidOperatorError(OpFieldError, ValueError):
    """An exponent matrix violates a structural requirement (spectrum, metadata)."""


class ConfigError(OpFieldError, ValueError):
    """A config document is malformed or fails parameter validation."""


class HypothesisNotMetError(OpFieldError, ValueError):
    """A statistical check was requested for a configuration outside its hypotheses."""


class UnsupportedConfigError(OpFieldError, ValueError):
    """A structurally valid configuration that the implementation does not cover."""
