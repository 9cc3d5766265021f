"""Exception hierarchy shared by all modules."""


class TSLError(Exception):
    """Base class for every error raised by :mod:`tsl`."""


class ValidationError(TSLError, ValueError):
    pass


class OrderingViolation(ValidationError):
    pass


class DegenerateBoundaryRow(ValidationError):
    pass


class PositivityViolation(ValidationError):
    def __init__(self, which, value):
        super().__init__(f"{which} = {value:.6g} must be > 0")
        self.which = which
        self.value = value


class AtTransmissionPointWithoutSide(TSLError, ValueError):
    pass


class StepLimitExceeded(TSLError, RuntimeError):
    pass


class StraddlesTransmissionPoint(TSLError, ValueError):
    pass


class SingularPlusBlock(TSLError, ArithmeticError):
    pass


class SingularMinusBlock(TSLError, ArithmeticError):
    pass


class QuadratureUnderResolved(TSLError, RuntimeError):
    pass


class PieceMismatch(TSLError, ValueError):
    pass


class ZeroOnContour(TSLError, RuntimeError):
    pass


class QuadratureInconclusive(TSLError, RuntimeError):
    pass


class DegenerateLeadingCoefficient(TSLError, ValueError):
    pass


class LostBracket(TSLError, RuntimeError):
    pass


class CompletenessMismatch(TSLError, RuntimeError):
    def __init__(self, found, counted, lam_lo, lam_hi):
        super().__init__(
            f"scan found {found} roots in [{lam_lo:.6g}, {lam_hi:.6g}] "
            f"but the winding number is {counted}"
        )
        self.found = found
        self.counted = counted
        self.lam_lo = lam_lo
        self.lam_hi = lam_hi
        self.eigenpairs = []


class NotAnEigenvalue(TSLError, ValueError):
    pass
