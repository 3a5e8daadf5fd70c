"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class NumericError(ArithmeticError):
    """A computation produced NaN or Inf."""


class DataError(ValueError):
    """A dataset or split cannot satisfy the request (too short, empty, ...)."""


class ParseError(DataError):
    """Malformed input file."""


class DegenerateError(ValueError):
    """A metric is undefined for the given inputs (zero denominator)."""


class UnsupportedModelError(ValueError):
    """The operation does not apply to this model configuration."""
