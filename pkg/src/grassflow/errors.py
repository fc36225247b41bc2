"""Exception types.

Every error raised on purpose by the library derives from GrassflowError.
The CLI maps the families below onto exit codes.
"""


class GrassflowError(Exception):
    pass


class ValidationError(GrassflowError, ValueError):
    """Bad input: shapes, file contents, preconditions."""


class NotContained(ValidationError):
    pass


class AmbientMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotComplementary(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class SectorMismatch(ValidationError):
    pass


class OutsideSector(ValidationError):
    pass


class StripViolation(ValidationError):
    pass


class PositiveGenerator(ValidationError):
    pass


class ZeroSubspace(ValidationError):
    pass


class NotNilpotent(ValidationError):
    pass


class NotHolomorphic(ValidationError):
    pass


class ConventionMismatch(ValidationError):
    pass


class MissingBoundarySpectrum(ValidationError):
    pass


class SpectrumHintInconsistent(ValidationError):
    pass


class ClusterAmbiguous(ValidationError):
    pass


class IllConditionedInstance(ValidationError):
    pass


class NoOrder(GrassflowError, ValueError):
    """Asked for the order of a Laurent polynomial that is identically zero."""


class DenominatorTooSmall(GrassflowError, ArithmeticError):
    pass


class TransversalityError(GrassflowError):
    pass


class NotTransversal(TransversalityError):
    pass


class ShadowNotTransversalToK(TransversalityError):
    pass


class CutoffUnreachable(GrassflowError):
    pass


class InternalInvariantViolation(GrassflowError, AssertionError):
    pass
