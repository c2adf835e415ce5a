"""Exception hierarchy shared across the package.

Two broad families: DataError for problems with the input data itself,
NumericalError for failures inside the estimation machinery. The CLI maps
them to distinct exit codes.
"""


class CcdrError(Exception):
    pass


class DataError(CcdrError):
    """Bad or unusable input data (CLI exit code 3)."""


class NumericalError(CcdrError):
    """Numerical failure during estimation (CLI exit code 4)."""


class ConstantResponseError(DataError):
    """Response has zero range, no spline basis can be built."""


class DegenerateResponseError(DataError):
    """Too few distinct response values for the requested knots."""


class ZeroVarianceError(DataError):
    """A predictor column is constant and cannot be standardized."""


class DataFormatError(DataError):
    """Malformed input file (missing columns, non-numeric cells, ...)."""


class SingularMatrixError(NumericalError):
    """A matrix required to be invertible is numerically singular."""


class InfeasibleProblemError(NumericalError):
    """Constraint set of the direction problem is empty."""


class DegenerateFitError(NumericalError):
    """Fit collapsed, e.g. every direction was filtered to zero."""


class ConfigError(CcdrError):
    """Invalid configuration values."""
