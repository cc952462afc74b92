"""Exception hierarchy.

Every error raised on purpose by the package derives from ``QuasiMarkovError``
so that the CLI can map validation problems and numeric failures onto
distinct exit codes.
"""


class QuasiMarkovError(Exception):
    """Base class for all package errors."""


class ValidationError(QuasiMarkovError, ValueError):
    """Malformed input: bad parameters, shapes or configuration."""


class NumericFailure(QuasiMarkovError, ArithmeticError):
    """A numeric rule could not be satisfied.

    ``rule`` names the rule that failed so reports can quote it.
    """

    rule = "numeric"

    def __init__(self, message, rule=None):
        super().__init__(message)
        if rule is not None:
            self.rule = rule


class QuadratureFailure(NumericFailure):
    rule = "quadrature"


class NonIntegrableDensity(QuadratureFailure):
    rule = "non-integrable-density"


class Inconclusive(NumericFailure):
    rule = "divergence-rule-inconclusive"


class SingularToeplitz(NumericFailure):
    rule = "singular-toeplitz"


class EmbeddingFailure(NumericFailure):
    rule = "circulant-embedding"


class LengthMismatch(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


class InsufficientPath(ValidationError):
    pass


class EmptyInterval(ValidationError):
    pass


class BlockTooLong(ValidationError):
    pass


class DimensionTooHigh(ValidationError):
    pass
