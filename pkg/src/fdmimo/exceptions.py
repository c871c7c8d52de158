"""Exception types raised by fdmimo."""


class ParameterError(ValueError):
    """An argument is outside its admissible range."""


class ConfigError(ValueError):
    """A configuration entry is unknown, malformed or inconsistent.

    The offending key is kept in ``key`` so front ends can report it.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(ArithmeticError):
    """A rate or matrix computation produced a non-finite or singular result."""
