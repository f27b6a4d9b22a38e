"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A model, grid, or config parameter violates its admissibility constraint."""


class ConfigError(ValueError):
    """Malformed run configuration (unknown key, bad syntax, wrong type)."""


class DomainError(ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""


class NumericError(ArithmeticError):
    """An iteration failed to converge or produced non-finite values."""


class DegenerateInputError(ValueError):
    """An input that is identically zero where a nonzero field is required."""


class ShapeError(ValueError):
    """Array shapes incompatible with the requested operation."""


class StagnationError(NumericError):
    """Line search could not make progress; carries the last solve report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
