"""Exception types shared across the package.

The CLI maps these onto exit codes, so keep the hierarchy flat.
"""


class DomainError(ValueError):
    """Argument outside the region where a quantity is defined."""


class IndexTooSmallError(DomainError):
    """Index below the smallest admissible n for a window schedule."""


class UnsupportedRegimeError(ValueError):
    """No closed-form asymptote is available for the requested parameters."""


class NonConvergenceError(ArithmeticError):
    """An iterative scheme failed to meet its tolerance."""


class InequalityViolation(AssertionError):
    """An exactly enumerated probability inequality did not hold."""
