"""Exception hierarchy; the CLI maps each class to its own exit status."""


class AlmgrenError(Exception):
    """Base class for all package errors."""


class ConfigError(AlmgrenError, ValueError):
    """Invalid or unsupported configuration."""


class NumericError(AlmgrenError, ArithmeticError):
    """A numerical tolerance could not be met."""


class DomainError(NumericError):
    """Evaluation requested outside the chart."""


class DegenerateError(NumericError):
    """Input is degenerate (for example a vanishing height function)."""
