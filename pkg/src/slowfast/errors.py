"""Exception and warning types."""


class SlowFastError(Exception):
    """Base class for all library errors."""


class ValidationError(SlowFastError, ValueError):
    """Malformed input (non-stochastic matrix, bad parameter range, ...)."""


class DimensionMismatch(ValidationError):
    pass


class SingularSystem(SlowFastError):
    """``I - P`` restricted to the transient set is numerically singular."""


class NotIrreducible(SlowFastError):
    pass


class AnchorMismatch(SlowFastError):
    pass


class AssumptionViolation(SlowFastError):
    """A standing structural assumption on the transition family fails."""


class ClassStructureVaries(AssumptionViolation):
    pass


class NoAbsorptionBound(AssumptionViolation):
    pass


class ClassMissing(AssumptionViolation):
    pass


class BallViolation(AssumptionViolation):
    """Jump sequence leaves the ball on which the gap bound is stated."""


class SequenceTooShort(SlowFastError):
    pass


class TruncationInsufficient(SlowFastError):
    """Law trajectory ends before the Poisson tail drops below tolerance."""


class ResourceLimit(SlowFastError):
    pass


class MCErrorDominates(UserWarning):
    """Monte Carlo half-width exceeds half of the estimated error."""
