"""Exception hierarchy shared by all eistwist modules."""


class EistwistError(Exception):
    """Base class for every error raised by this package."""


class PoleError(EistwistError, ValueError):
    pass


class DomainError(EistwistError, ValueError):
    pass


class NonFinite(EistwistError, ArithmeticError):
    pass


class MaxEvaluations(EistwistError, RuntimeError):
    pass


class UnsupportedLevel(EistwistError, ValueError):
    pass


class IdentityInput(EistwistError, ValueError):
    pass


class UnsupportedPrime(EistwistError, ValueError):
    pass


class TruncationInsufficient(EistwistError, RuntimeError):
    pass


class ConvergenceRegion(EistwistError, ValueError):
    """Requested parameters lie outside the region where a direct sum converges."""


class TailTooLarge(EistwistError, RuntimeError):
    pass


class EnvelopeViolation(EistwistError, RuntimeError):
    """A modular-symbol value exceeded its fitted growth envelope by 10x."""


class IllConditioned(EistwistError, RuntimeError):
    pass


class ContinuationUnavailable(EistwistError, ValueError):
    pass


class ValidationFailure(EistwistError, RuntimeError):
    pass


class PoleHit(EistwistError, ValueError):
    pass


class PreconditionUnverifiable(EistwistError, RuntimeError):
    pass


class ConfigError(EistwistError, ValueError):
    pass
