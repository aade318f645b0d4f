"""Exception types raised by the library."""


class CharpolyError(Exception):
    """Base class for all library errors."""


class EigensolverError(CharpolyError):
    """Hermitian eigensolve failed or returned a non-PSD spectrum."""


class DegenerateEstimateError(CharpolyError):
    """A Monte Carlo estimate is degenerate (zero or wrong-signed normalizer)."""


class ConditioningError(CharpolyError, ValueError):
    """Arguments are too close together for a well-conditioned evaluation."""


class AiryRangeError(CharpolyError, ValueError):
    """Airy argument outside the supported range."""
