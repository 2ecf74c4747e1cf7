"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class BracketError(ValueError):
    """A root-finding bracket does not straddle a sign change."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting its tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DataError(ValueError):
    """Input data is unusable for the requested analysis."""


class ParseError(DataError):
    """Malformed numeric input. Carries 1-based line and column/token positions."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", token {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class ConfigError(ValueError):
    """A simulation or command configuration is invalid."""
