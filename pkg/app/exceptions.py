"""Exception hierarchy for the reconstruction library."""
from typing import Any, Optional


class ReconstructionError(Exception):
    """Base exception for every failure raised by the library."""
    pass


class ParameterError(ReconstructionError, ValueError):
    """Raised when a parameter lies outside its admissible range."""
    pass


class DimensionError(ReconstructionError, ValueError):
    """Raised on length or shape mismatches."""
    pass


class StabilityError(ParameterError):
    """Raised when an explicit scheme violates its stability bound."""
    pass


class NumericalBlowUpError(ReconstructionError):
    """Raised when a propagated state stops being finite."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


class SingularMatrixError(ReconstructionError):
    """Raised when a linear system cannot be solved."""
    pass


class EigenConvergenceError(ReconstructionError):
    """Raised when the Jacobi eigensolver hits its sweep cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class RankDeficiencyError(ReconstructionError):
    """Raised when an SPD routine receives a rank-deficient matrix."""

    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


class RankCollapseError(ReconstructionError):
    """Raised when a square-root covariance factor loses every direction."""
    pass


class UndefinedMetricError(ReconstructionError):
    """Raised when an error metric is requested against a zero reference."""
    pass


class ConfigError(ReconstructionError):
    """Raised on malformed or invalid experiment configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ExperimentError(ReconstructionError):
    """Raised when an experiment fails; carries the offending configuration."""

    def __init__(self, message: str, config: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.config = config or {}
