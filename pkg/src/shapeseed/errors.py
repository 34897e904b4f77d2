"""Exception types raised across the toolkit."""


class ShapeSeedError(ValueError):
    """Base class for all toolkit errors."""


class DimensionError(ShapeSeedError):
    """Array shapes disagree or are too small for the requested operation."""


class ParameterError(ShapeSeedError):
    """A parameter is outside its valid range."""


class ContractError(ShapeSeedError):
    """An input violates a documented precondition (e.g. unnormalized scores)."""


class FormatError(ShapeSeedError):
    """A file could not be parsed as the expected format."""
