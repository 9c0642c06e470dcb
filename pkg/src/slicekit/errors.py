"""Exception hierarchy shared across the package."""


class SlicekitError(Exception):
    """Base class for all package-specific errors."""


class DomainMismatchError(SlicekitError, ValueError):
    """Distributions or strings with incompatible domains / lengths."""


class ConditioningError(SlicekitError, ValueError):
    """Conditioning on an event of zero probability."""


class CapacityError(SlicekitError, ValueError):
    """A computation would exceed a hard enumeration / representation cap."""


class EliminationError(SlicekitError, ValueError):
    """An elimination procedure was called with invalid parameters."""


class EliminationInvariantError(SlicekitError, RuntimeError):
    """An elimination procedure hit a state its supporting lemmas rule out."""


class DiscrepancyError(SlicekitError, RuntimeError):
    """Two independent computations of the same quantity disagree."""

    def __init__(self, message, outcome=None, lhs=None, rhs=None):
        super().__init__(message)
        self.outcome = outcome
        self.lhs = lhs
        self.rhs = rhs


class FormatError(SlicekitError, ValueError):
    """A serialized file does not conform to its declared format."""
