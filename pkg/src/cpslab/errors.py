"""Exception hierarchy shared by all cpslab modules."""


class CpslabError(Exception):
    """Base class for all cpslab errors."""


class DimensionMismatch(CpslabError):
    """Input arrays have inconsistent shapes."""


class SingularSystem(CpslabError):
    """A factorization detected rank deficiency beyond tolerance."""


class MaskTooLarge(CpslabError):
    """An inclusion mask selects more covariates than the configured cap."""


class TooLarge(CpslabError):
    """Instance exceeds the size bounds of exact enumeration."""


class DegenerateInput(CpslabError):
    """Input data cannot support the requested computation."""


class NonFiniteError(CpslabError):
    """A log marginal likelihood evaluated to a non-finite value."""


class ParseError(CpslabError):
    """A data file could not be parsed.

    Carries the 1-based row and the column name (or index) where parsing
    failed, so callers can report the exact location.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(CpslabError):
    """A data file is missing required columns."""


class ConfigError(CpslabError):
    """Invalid configuration (bad flag value, inconsistent settings)."""


class RidgeFallbackWarning(UserWarning):
    """A rank-deficient block fit fell back to the ridge-regularized solve."""
