"""Shared exception types."""


class AdaptPartError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AdaptPartError):
    """Input data violates a structural contract."""


class SolverFailure(AdaptPartError):
    """The LP kernel could not certify a correct answer."""


class RecourseViolation(AdaptPartError):
    """A second-stage subproblem was infeasible or unbounded."""
