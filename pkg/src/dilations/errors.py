class DilationError(Exception):
    """Base class of every error raised by the dilations app"""
    exit_code = 1


class InvalidInput(DilationError):
    """The input violates a precondition of the requested operation"""
    exit_code = 2


class NumericalFailure(DilationError):
    """The input is valid but could not be processed at the configured tolerances"""
    exit_code = 3


class InvalidMatrix(InvalidInput):
    pass


class InvalidJob(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class NotExpansive(InvalidInput):
    pass


class SingularMatrix(InvalidInput):
    pass


class ZeroVector(InvalidInput):
    pass


class NonPositiveSpectrum(InvalidInput):
    pass


class NotUnipotent(InvalidInput):
    pass


class KindMismatch(InvalidInput):
    pass


class IllConditionedBasis(NumericalFailure):
    pass


class UnresolvedSpectrum(NumericalFailure):
    """Eigenvalue clusters could not be resolved at the given tolerance"""
    pass


class ReconstructionFailed(NumericalFailure):
    pass


class CertificationFailed(NumericalFailure):
    pass
