"""Exception types raised across the package."""


class DevsurfError(Exception):
    pass


class DomainError(DevsurfError, ValueError):
    """Parameter outside the surface domain or invalid knot data."""


class DegenerateParameterizationError(DevsurfError, ArithmeticError):
    """Vanishing cross product or singular first fundamental form."""


class InitializationError(DevsurfError):
    pass


class DegenerateCircleError(DevsurfError, ValueError):
    pass


class ConfigError(DevsurfError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalFailure(DevsurfError, ArithmeticError):
    """Non-finite energy or an unrecoverable linear solve.

    ``dump`` carries whatever diagnostic state the raiser could collect.
    """

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}
