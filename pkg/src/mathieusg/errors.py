"""Exception types shared across the package.

All numeric failures derive from :class:`NumericError` so the CLI can map
them to exit code 1 uniformly.
"""


class NumericError(Exception):
    """Base class for numeric failures surfaced to callers and the CLI."""


class NonPositiveProduct(NumericError):
    """A coupling product alpha_j * beta_j <= 0 where positivity is required."""


class EpsilonZero(NumericError):
    """Operation requires a nonzero coupling strength epsilon."""


class IndexOutOfRange(NumericError):
    """Requested eigenvalue index exceeds the truncation order."""


class InvalidPeriodClass(NumericError):
    """Inconsistent (N, k, form) combination for a period-2Npi matrix."""


class NoSignChange(NumericError):
    """Bisection bracket does not straddle a root."""


class AmbiguousBand(NumericError):
    """Stable-band bookkeeping could not resolve a gap classification."""


class LevelTooLarge(NumericError):
    """Requested gasket approximation level exceeds the memory guard."""


class DomainError(NumericError):
    """Argument outside the domain of a decimation branch map."""


class ForbiddenEigenvalue(NumericError):
    """Spectral decimation cannot extend through eigenvalue 2, 5 or 6."""


class EigenvalueAbsent(NumericError):
    """The requested initial eigenvalue is not in the discrete spectrum."""


class SingularNormalEquations(NumericError):
    """Gauss-Newton normal equations are singular after damping."""


class InsufficientData(NumericError):
    """Fewer data points than free parameters."""


class UnknownDatasetKind(NumericError):
    """SVG exporter got a dataset it has no renderer for."""
