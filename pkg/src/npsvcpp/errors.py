"""Exception types shared across the package.

The CLI maps these onto exit codes, so the split between numeric,
data/config, and shape errors is part of the public contract.
"""


class NumericalError(RuntimeError):
    """Base class for numeric failures inside solvers and trainers."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix expected to be positive definite failed to factor."""


class RankDeficiencyError(NumericalError):
    """An input matrix does not have full column rank."""


class NonConvergedError(NumericalError):
    """An iterative solver hit its iteration cap before its tolerance.

    Attributes
    ----------
    residual : float or None
        Final stationarity residual or objective, when available.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(NumericalError):
    """Training produced a non-finite loss."""


class DegenerateModelError(NumericalError):
    """A fitted model violates a predictor invariant (for example a
    zero distance denominator)."""


class DegenerateDataError(ValueError):
    """Input data cannot support the requested computation."""


class DatasetError(ValueError):
    """Malformed dataset file or an invalid dataset operation."""


class ParseError(DatasetError):
    """Text parse failure; the message carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConfigError(ValueError):
    """Invalid run configuration (CLI flags or sweep config file)."""


class ShapeMismatchError(ValueError):
    """Feature dimensions of data and model disagree."""


class ModelFormatError(ValueError):
    """Model payload is corrupt or structurally invalid."""


class ModelVersionError(ModelFormatError):
    """Model payload declares an unsupported format version."""
