"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class InvariantViolation(RuntimeError):
    """A model property required by the algorithm does not hold."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``estimate`` carries the best value obtained before giving up, when one
    exists.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConfigError(ValueError):
    """A run configuration could not be parsed or validated."""
