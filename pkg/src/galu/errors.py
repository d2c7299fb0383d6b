"""Exception hierarchy shared by every galu module."""


class GaluError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GaluError, ValueError):
    """Array shapes or dimensions are inconsistent."""


class CapacityError(GaluError, MemoryError):
    """A dense allocation would exceed the configured memory budget."""


class NotDiverseError(GaluError, ValueError):
    """The data has lambda(X) at or below numerical tolerance."""


class SingularGramError(GaluError, ValueError):
    """A Gram matrix that must be inverted is numerically singular."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class PreconditionError(GaluError, ValueError):
    """An operation was called outside its admissible regime."""


class DegenerateInstanceError(GaluError, RuntimeError):
    """Repeated resampling failed to produce a non-degenerate instance."""
