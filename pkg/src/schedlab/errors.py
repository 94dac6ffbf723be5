"""Exception types raised across the package."""


class DomainError(ValueError):
    """A time value lies outside the schedule family's domain."""


class DegenerateNoiseError(ValueError):
    """The noise scale b(t) is zero, so p(z|t) is a sum of point masses."""


class NoSupportError(RuntimeError):
    """Every grid point of the posterior p(t|z) has zero probability."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class MalformedFileError(ValueError):
    """A dataset file does not match its declared binary layout."""
