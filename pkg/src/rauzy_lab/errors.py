"""Exception hierarchy shared by every module."""


class RauzyLabError(Exception):
    """Base class for all package errors."""


class ValidationError(RauzyLabError, ValueError):
    pass


class DuplicateLetter(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class ReduciblePair(ValidationError):
    pass


class NotALoop(ValidationError):
    pass


class ConstructionFailed(RauzyLabError):
    pass


class OddRank(RauzyLabError):
    pass


class NonUnimodularForm(RauzyLabError):
    pass


class NotSymplectic(RauzyLabError):
    pass


class CapExceeded(RauzyLabError):
    pass


class NotSurjective(RauzyLabError):
    pass


class TieUndefined(RauzyLabError):
    """Lengths of the two competing intervals coincide; induction is undefined."""


class StepBudgetExceeded(RauzyLabError):
    pass


class TooFewSamples(ValidationError):
    pass


class NoConvergence(RauzyLabError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ModulusMismatch(ValidationError):
    pass


class EvenPrime(ValidationError):
    pass


class EvenModulus(ValidationError):
    pass


class ZeroModP(ValidationError):
    pass


class EmptyBranchSet(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BoundaryPoint(ValidationError):
    """A simplex point with a zero coordinate, where the Hilbert metric blows up."""
