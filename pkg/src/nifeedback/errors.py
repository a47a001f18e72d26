"""Exception hierarchy.

Precondition violations derive from :class:`ValueError`, numerical
breakdowns from :class:`ArithmeticError`, so callers can catch either
family without importing this module.
"""


class NIError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(NIError, ValueError):
    """An operation was called with inputs outside its contract."""


class DimensionError(PreconditionError):
    """Matrix dimensions are inconsistent."""


class OptionError(PreconditionError):
    """A synthesis option is invalid (wrong shape, sign or bound)."""


class NumericalError(NIError, ArithmeticError):
    """A numerical backend failed or produced an unusable result."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class PoleEvaluationError(PreconditionError):
    """A transfer function was evaluated at (or next to) one of its poles."""

    def __init__(self, message, nearest_eigenvalue):
        super().__init__(message)
        self.nearest_eigenvalue = nearest_eigenvalue


class UnsupportedRelativeDegreeError(PreconditionError):
    """The plant is neither relative degree one nor relative degree two.

    Only uniform relative degree one (``CB`` nonsingular) and two
    (``CB = 0``, ``CAB`` nonsingular) are handled; mixed or higher
    relative degrees are out of scope.
    """


class ConstructionError(NumericalError):
    """A normal-form coordinate transformation could not be built."""


class GateError(PreconditionError):
    """A structural hypothesis of the synthesis (eligibility gate) failed."""

    def __init__(self, message, reason):
        super().__init__(message)
        self.reason = reason


class SynthesisError(NumericalError):
    """Gain construction failed (search exhausted or self-check failed)."""


class WellPosednessError(PreconditionError):
    """A feedback interconnection has no unique solution."""
