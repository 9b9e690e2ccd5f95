"""Exception hierarchy.

Everything raised for bad user input derives from ``InputError`` (the CLI maps
it to exit code 2); anything else is a runtime failure.
"""


class RankDiffusionError(Exception):
    pass


class InputError(RankDiffusionError, ValueError):
    """Invalid parameters, arguments or configuration."""


class DomainError(InputError):
    pass


class NonDecreasingDrift(InputError):
    pass


class DegenerateDiffusion(InputError):
    pass


class ModelError(InputError):
    pass


class InvalidStep(InputError):
    pass


class CflViolation(InputError):
    pass


class InsufficientCheckpoints(InputError):
    pass


class ValidationError(InputError):
    pass


class ConfigError(ValidationError):
    pass


class ParseError(InputError):
    pass


class NonPositiveRate(RankDiffusionError, ArithmeticError):
    """A stationary gap rate came out non-positive."""
