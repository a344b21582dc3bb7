"""Exception hierarchy shared by every module.

Each class maps onto one CLI exit code (see :mod:`lspd.cli`).
"""


class LspdError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDataError(LspdError, ValueError):
    """Input data is non-finite, non-numeric or otherwise unusable."""


class InsufficientDataError(LspdError, ValueError):
    """Too few observations for the requested computation."""


class InvalidParameterError(LspdError, ValueError):
    """A tuning parameter is outside its admissible range."""


class ShapeError(LspdError, ValueError):
    """Array dimensions do not agree."""


class InvalidLabelsError(LspdError, ValueError):
    """Class labels are missing a class or are not in 1..J."""


class DegenerateFeatureError(LspdError, ValueError):
    """A feature column has too few distinct values for a spline basis."""


class NumericalError(LspdError, ArithmeticError):
    """A linear solve or optimisation step failed."""


class IngestionError(LspdError, ValueError):
    """A CSV file does not match the expected schema."""
