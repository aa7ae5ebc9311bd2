"""Exception types shared across the package."""


class DissonanceError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DissonanceError, ValueError):
    """Subsystem dimensions are missing, inconsistent, or out of range."""


class ContractError(DissonanceError, ValueError):
    """An input violates a numerical contract (Hermiticity, normalization, ...)."""


class DomainError(DissonanceError, ValueError):
    """A scalar argument lies outside the domain of the operation."""


class CapacityError(DissonanceError, ValueError):
    """A requested auxiliary space is too small for the input."""


class ParseError(DissonanceError, ValueError):
    """An input file is malformed; the message names the offending line or field."""
