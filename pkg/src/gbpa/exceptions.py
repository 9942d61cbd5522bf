class RootFindingError(ArithmeticError):
    """The Tsallis dual solve did not reach tolerance.

    ``bracket`` holds the last (lo, hi) interval for the normalizer offset.
    """

    def __init__(self, message, bracket=None, iterations=None):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class MonotonicityError(ArithmeticError):
    """The dual normalizer function was observed to increase along the bracket."""


class SimplexError(ValueError):
    """A sampling distribution has a non-positive entry or does not sum to one."""


class LossRangeError(ValueError):
    """A loss entry lies outside [-1, 0]."""


class UnavailableError(ValueError):
    """Requested quantity has no implementation for this model (e.g. no closed form)."""
