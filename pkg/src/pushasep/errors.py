"""Exception hierarchy shared by all numerical routines."""


class PushASEPError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PushASEPError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(PushASEPError, ArithmeticError):
    """A numerical procedure failed to reach its accuracy target."""


class NonConvergence(NumericalError):
    pass


class TruncationFailure(NumericalError):
    pass


class DimensionMismatch(ValidationError):
    pass


class WindowTooSmall(NumericalError):
    pass


class ContourCollision(ValidationError):
    pass


class SingularGram(NumericalError):
    pass


class WindowDivergence(NumericalError):
    pass


class QuadratureDivergence(NumericalError):
    pass


class RootNotBracketed(ValidationError):
    pass


class InvalidBound(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass
