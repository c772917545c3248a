class InvalidArgument(ValueError):
    """A caller supplied a value outside an operation's domain."""


class RegimeError(InvalidArgument):
    """Model parameters violate an inequality an operation depends on."""


class DomainError(InvalidArgument):
    """The scaling law has a non-positive right-hand side at this intensity.

    ``min_s`` is the smallest intensity at which it becomes positive.
    """

    def __init__(self, message, min_s=None):
        super().__init__(message)
        self.min_s = min_s


class NumericalFailure(ArithmeticError):
    """A quadrature or root finder did not converge.

    ``estimates`` holds the last two values produced before giving up.
    """

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class ConfigError(InvalidArgument):
    """An experiment configuration is missing a key or has a bad value."""
