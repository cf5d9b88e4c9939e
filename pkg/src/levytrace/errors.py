"""Exception hierarchy shared by all modules."""


class LevyTraceError(Exception):
    """Base class for every error raised by levytrace."""


class ArgumentError(LevyTraceError, ValueError):
    """Invalid arguments or violated preconditions."""


class DomainError(ArgumentError):
    """Argument outside the mathematical domain (e.g. negative radius)."""


class RangeError(ArgumentError):
    """Evaluation outside the range covered by tabulated data."""


class NumericError(LevyTraceError, ArithmeticError):
    """Quadrature or root finding did not converge."""


class GeometryError(LevyTraceError):
    """A geometric construction failed its own consistency checks."""


class ConfigError(LevyTraceError):
    """Malformed experiment configuration."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
