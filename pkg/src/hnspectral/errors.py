"""Exception hierarchy for hnspectral."""


class HNSpectralError(Exception):
    """Base class for all errors raised by this package."""


class PoleProximity(HNSpectralError, ValueError):
    pass


class NotHerglotz(HNSpectralError, ValueError):
    pass


class DegenerateInput(HNSpectralError, ValueError):
    pass


class IntegrationFailure(HNSpectralError, RuntimeError):
    pass


class BracketingFailure(HNSpectralError, RuntimeError):
    pass


class NotAnEigenvalue(HNSpectralError, ValueError):
    pass


class NonPositiveNorming(HNSpectralError, RuntimeError):
    pass


class DegenerateEigenfunction(HNSpectralError, RuntimeError):
    pass


class IndexOutOfRange(HNSpectralError, IndexError):
    pass


class DimensionMismatch(HNSpectralError, ValueError):
    pass


class NotPositiveDefinite(HNSpectralError, ValueError):
    pass


class SingularSystem(HNSpectralError, ValueError):
    pass


class NoConvergence(HNSpectralError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnderdeterminedProblem(HNSpectralError, ValueError):
    pass
