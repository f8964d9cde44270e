"""Semantic exception types shared across the package."""


class PstrataError(Exception):
    """Base class for all package errors."""


class ParameterError(PstrataError, ValueError):
    """A parameter vector violates its domain constraints."""


class EmptyArmError(PstrataError, ValueError):
    """A required (treatment arm, trial) cell has no observations."""


class SupportError(PstrataError, ValueError):
    """Counts were assigned to a stratum the model excludes."""


class RatioDegeneracyError(PstrataError, ValueError):
    """A trial pair has proportional stratum mixes, so the two-trial solve is singular."""


class AbsentStratumError(PstrataError, LookupError):
    """A stratum was requested that the fitted model does not contain."""


class UntestableModelError(PstrataError, ValueError):
    """Goodness-of-fit test requested for a model with no spare degrees of freedom."""


class NumericalError(PstrataError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""
