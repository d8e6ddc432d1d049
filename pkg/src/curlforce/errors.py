"""Exception hierarchy shared by all modules."""


class CurlForceError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CurlForceError, ValueError):
    """A function was evaluated outside its analytic domain, or a point lies outside D."""


class DimensionMismatch(CurlForceError, ValueError):
    pass


class OrderExceeded(CurlForceError, ValueError):
    pass


class ParseError(CurlForceError, ValueError):
    """Malformed expression or config text. Carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)


class SingularMetric(CurlForceError, ArithmeticError):
    """The momentum Hessian is singular: the p-v map is not a diffeomorphism here."""


class NoConvergence(CurlForceError, ArithmeticError):
    pass


class SingularM(CurlForceError, ValueError):
    pass


class SingularN(CurlForceError, ValueError):
    pass


class NotCurlFree(CurlForceError, ValueError):
    pass


class OdeFailure(CurlForceError, ArithmeticError):
    pass


class SignViolation(CurlForceError, ValueError):
    """f(H) changed sign, so the 1D family member cannot be regular."""


class QuadratureFailure(CurlForceError, ArithmeticError):
    pass


class PrincipalValueFailure(QuadratureFailure):
    pass


class EtaNotRegular(CurlForceError, ValueError):
    pass


class NotDiffeomorphism(CurlForceError, ValueError):
    pass


class VerificationFailure(CurlForceError, AssertionError):
    """A post-build or pipeline verification did not hold."""


class InsufficientSamples(CurlForceError, ValueError):
    pass


class StencilOutsideDomain(CurlForceError, ValueError):
    pass


class NoInvertibleSolution(CurlForceError, ArithmeticError):
    pass


class StepFailure(CurlForceError, ArithmeticError):
    pass


class NonBlowup(CurlForceError, ValueError):
    """S(t) only diverges in the past; ``t_star`` holds the signed divergence time."""

    def __init__(self, message, t_star):
        self.t_star = t_star
        super().__init__(message)


class NotTwoDimensional(CurlForceError, ValueError):
    pass
