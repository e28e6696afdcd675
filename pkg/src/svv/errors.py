"""Exception types. The CLI maps each one to its own exit code."""


class SVVError(Exception):
    exit_code = 1


class ConfigError(SVVError, ValueError):
    """Malformed or incomplete experiment configuration."""

    exit_code = 2


class AssumptionError(ConfigError):
    """A model assumption is violated (e.g. gamma <= 1/H - 1, dt*c3 >= 1).

    A configuration error in kind, with its own exit code.
    """

    exit_code = 3


class NumericalError(SVVError, ArithmeticError):
    """A numerical routine failed (no bracket, zero denominator, ...)."""

    exit_code = 4
