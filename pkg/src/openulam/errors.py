"""Exception types raised by openulam."""


class OpenUlamError(Exception):
    """Base class for all library errors."""


class ValidationError(OpenUlamError, ValueError):
    """A parameter or config field violates an operation precondition."""


class DomainError(OpenUlamError, ValueError):
    """A point lies outside the domain where a map or branch is defined."""


class BranchRangeError(OpenUlamError, ValueError):
    """A value lies outside the image of a branch."""


class ResourceError(OpenUlamError, RuntimeError):
    """A configured size cap (branches, interval components) was exceeded."""


class NotApplicableError(OpenUlamError, ValueError):
    """A diagnostic was requested for a system it does not apply to."""


class NumericalError(OpenUlamError, RuntimeError):
    """Root finding or matrix assembly failed."""


class NonConvergenceError(OpenUlamError, RuntimeError):
    """Power iteration hit ``max_iter`` before reaching the tolerance."""

    def __init__(self, message, left_residual=None, right_residual=None, iterations=None):
        super().__init__(message)
        self.left_residual = left_residual
        self.right_residual = right_residual
        self.iterations = iterations


class DegenerateSolutionError(OpenUlamError, ValueError):
    """An eigenvector (or product of eigenvectors) is identically zero."""


class StatisticsError(OpenUlamError, ValueError):
    """Too few survivors for a Monte Carlo estimate."""
