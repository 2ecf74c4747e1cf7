"""Estimating the Shannon entropy of a gamma population chosen by the natural selection rule."""

from .errors import BracketError, ConfigError, DataError, DomainError, ParseError, QuadratureError

__version__ = "0.1.0"

__all__ = ["BracketError", "ConfigError", "DataError", "DomainError", "ParseError", "QuadratureError",
           "__version__"]
