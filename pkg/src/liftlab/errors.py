"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2),
invalid model input (3) and numerical aborts (4).
"""


class LiftLabError(Exception):
    """Base class for every error raised by liftlab."""


class ConfigError(LiftLabError):
    """Malformed configuration, unreadable input file or unknown keys."""


class ValidationError(LiftLabError):
    """Input parsed but violates a model invariant."""


class RateSignMismatch(ValidationError):
    pass


class Disconnected(ValidationError):
    pass


class SelfLoop(ValidationError):
    pass


class DuplicateEdge(ValidationError):
    pass


class NotAdjacent(ValidationError):
    pass


class SupportMismatch(ValidationError):
    pass


class WindowTooSmall(ValidationError):
    pass


class StepTooLarge(ValidationError):
    pass


class NonPSD(ValidationError):
    pass


class InsufficientSpan(ValidationError):
    pass


class NumericalAbort(LiftLabError):
    """A run was stopped because its numerical guarantees no longer hold."""


class SingularSolve(NumericalAbort):
    pass


class ExcessiveLeak(NumericalAbort):
    pass


class NegativeDensity(NumericalAbort):
    pass


class CurlObstruction(LiftLabError):
    """The field admits no detailed-balanced stationary measure."""

    def __init__(self, message, max_curl=None):
        super().__init__(message)
        self.max_curl = max_curl
