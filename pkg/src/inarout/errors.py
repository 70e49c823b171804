"""Exception taxonomy for the package."""


class InarError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(InarError, ValueError):
    """Malformed model, scenario, or series input."""


class SampleTooShort(ValidationError):
    """The series is shorter than the scenario's minimum sample size."""


class MissingMu(ValidationError):
    """The scenario declares the innovation mean known, but no value was given."""


class BadTimes(ValidationError):
    """Outlier times incompatible with the series (missing neighbours, out of range)."""


class DegenerateDenominator(InarError):
    """An estimator's defining denominator (or leading coefficient) is not positive."""


class OptimizerFailed(InarError):
    """Profile minimization could not certify an interior minimum."""


class SingularMoment(InarError):
    """Moment matrix not invertible (defensive; unreachable for valid inputs)."""


class CampaignFailed(InarError):
    """Monte Carlo campaign exceeded the degenerate-replication budget."""
