"""Exception types raised across the package."""


class HylcError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HylcError, ValueError):
    """Malformed input: wrong dimension, non-finite values, bad options."""


class ParameterError(InvalidInputError):
    """A catalog parameter set violates its admissibility conditions."""


class RegionError(HylcError):
    """A state left the admissible region while it was required to stay in it."""


class DivergenceError(HylcError):
    """Integration produced non-finite values."""


class NoReturnError(HylcError):
    """A flow did not reach the jump set before the horizon."""


class NonConvergenceError(HylcError):
    """An iterative solver did not meet its tolerance."""


class TransversalityError(HylcError):
    """The flow is not transversal to the guard at a reported impact."""


class DegenerateError(HylcError):
    """An operation was requested on degenerate data (e.g. zero impact time)."""
