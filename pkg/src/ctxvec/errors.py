"""Exception types shared across the toolkit."""


class CtxvecError(Exception):
    """User-correctable problem: bad input data, file, or configuration."""


class FormatError(CtxvecError):
    """A file does not conform to its declared format."""


class DimensionMismatchError(CtxvecError):
    """Vector or matrix dimensions do not agree."""
