from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from app.core.filters import FilterParams
from app.core.observation import NoiseSpec
from app.core.reconstruction import IterationControl, NudgingParams
from app.core.wave_core import GridSpec, SchemeParams, check_stability
from app.exceptions import ParameterError


def _split_floats(value: Any) -> Any:
    """Accept `0.1,0.2` as well as a list."""
    if isinstance(value, str):
        return [float(item) for item in value.split(",") if item.strip()]
    if isinstance(value, (int, float)):
        return [float(value)]
    return value


FloatList = Annotated[List[float], BeforeValidator(_split_floats)]


class Method(str, Enum):
    TR = "TR"
    BFN = "BFN"
    BF_SEEK = "BF-SEEK"
    KF = "KF"


class PhantomKind(str, Enum):
    GAUSSIAN_BUMPS = "gaussian-bumps"
    TRIANGLE = "triangle"
    BOXCAR = "boxcar"
    FROM_FILE = "from-file"


# Phantom Schemas
class PhantomSpec(BaseModel):
    """
    Test object on an `n`-node interior grid starting at x_min + delta_x.

    centers/widths/amplitudes describe a sum of shapes: Gaussians of standard
    deviation `width`, triangles or boxes of half-width `width`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PhantomKind = PhantomKind.GAUSSIAN_BUMPS
    centers: FloatList = Field(default_factory=lambda: [-0.15, 0.2])
    widths: FloatList = Field(default_factory=lambda: [0.05, 0.08])
    amplitudes: FloatList = Field(default_factory=lambda: [1.0, 0.6])
    path: Optional[Path] = None
    n: int = Field(default=100, ge=3)
    x_min: float = -0.5
    delta_x: float = Field(default=0.01, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "PhantomSpec":
        if self.kind is PhantomKind.FROM_FILE:
            if self.path is None:
                raise ParameterError("A from-file phantom needs a path")
            return self
        if not len(self.centers) == len(self.widths) == len(self.amplitudes):
            raise ParameterError(
                f"centers, widths and amplitudes differ in length "
                f"({len(self.centers)}, {len(self.widths)}, {len(self.amplitudes)})"
            )
        if any(w < 0 for w in self.widths):
            raise ParameterError("Phantom widths must be non-negative")
        if self.kind is PhantomKind.GAUSSIAN_BUMPS and any(w == 0 for w in self.widths):
            raise ParameterError("Gaussian widths must be positive")
        return self

    def grid(self) -> GridSpec:
        return GridSpec.from_spacing(self.x_min, self.delta_x, self.n)


# Experiment Schemas
class ExperimentConfig(BaseModel):
    """
    One reconstruction experiment.

    Defaults reproduce the reference setting: dx = 1/100, dt = 1/200, T = 1,
    theta = 1/4, R = 0.3 I, gamma = 0.01, rank 120.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Grid and scheme
    x_min: float = -0.5
    delta_x: float = Field(default=0.01, gt=0)
    n_interior: int = Field(default=100, ge=3)
    delta_t: float = Field(default=0.005, gt=0)
    final_time: float = Field(default=1.0, gt=0)
    n_steps: Optional[int] = Field(default=None, ge=1)
    theta: float = Field(default=0.25, ge=0.0, le=0.5)
    attenuation_alpha: Optional[float] = Field(default=None, gt=1.0, le=2.0)
    attenuate_data: bool = False

    # Sensors and data
    delta_data: int = Field(default=10, ge=1)
    sensor_offset: int = Field(default=0, ge=0)
    noise_level: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0

    method: Method = Method.BF_SEEK

    # Filters
    R_scale: float = Field(default=0.3, gt=0)
    gamma: float = Field(default=0.01, ge=0)
    rank: int = Field(default=120, ge=1)
    rank_tol: float = Field(default=1e-10, gt=0)
    sigma0: float = Field(default=1.0, ge=0)
    observe_velocity: bool = False
    columnwise_forecast: bool = False
    eig_method: Literal["lapack", "jacobi"] = "lapack"

    # Nudging
    nudging_gain: Optional[float] = Field(default=None, gt=0)
    nudging_step_weight: Optional[float] = Field(default=None, gt=0)
    derivative_feedback: bool = True

    # Iterations
    max_iterations: int = Field(default=100, ge=1)
    rel_tol: float = Field(default=1e-3, gt=0)
    rms_floor: float = Field(default=1e-2, ge=0)
    convergence_metric: Literal["rms-change"] = "rms-change"

    # Phantom
    phantom_kind: PhantomKind = PhantomKind.GAUSSIAN_BUMPS
    phantom_centers: FloatList = Field(default_factory=lambda: [-0.15, 0.2])
    phantom_widths: FloatList = Field(default_factory=lambda: [0.05, 0.08])
    phantom_amplitudes: FloatList = Field(default_factory=lambda: [1.0, 0.6])
    phantom_path: Optional[Path] = None

    output_dir: Optional[Path] = None

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.sensor_offset >= self.n_interior:
            raise ParameterError(f"sensor_offset {self.sensor_offset} outside [0, {self.n_interior})")
        if self.nudging_gain is not None and self.nudging_step_weight is not None:
            raise ParameterError("Give nudging_gain or nudging_step_weight, not both")
        if self.rank > 2 * self.n_interior:
            raise ParameterError(f"rank {self.rank} exceeds the state dimension {2 * self.n_interior}")
        check_stability(self.grid(), self.scheme())
        self.phantom_spec()
        return self

    @property
    def steps(self) -> int:
        if self.n_steps is not None:
            return self.n_steps
        return max(1, int(round(self.final_time / self.delta_t)))

    def grid(self) -> GridSpec:
        return GridSpec.from_spacing(self.x_min, self.delta_x, self.n_interior)

    def scheme(self) -> SchemeParams:
        return SchemeParams(
            delta_t=self.delta_t,
            n_steps=self.steps,
            theta=self.theta,
            attenuation_alpha=self.attenuation_alpha,
        )

    def noise(self) -> NoiseSpec:
        return NoiseSpec(level=self.noise_level, seed=self.seed)

    def filter_params(self) -> FilterParams:
        return FilterParams(
            R_scale=self.R_scale,
            gamma=self.gamma,
            rank=self.rank,
            rank_tol=self.rank_tol,
            sigma0=self.sigma0,
            observe_velocity=self.observe_velocity,
            columnwise_forecast=self.columnwise_forecast,
            eig_method=self.eig_method,
        )

    def nudging(self) -> NudgingParams:
        if self.nudging_gain is not None:
            return NudgingParams(gain=self.nudging_gain, use_derivative_feedback=self.derivative_feedback)
        if self.nudging_step_weight is not None:
            return NudgingParams.from_step_weight(self.nudging_step_weight, self.delta_t, self.derivative_feedback)
        return NudgingParams.default_for(self.delta_t, self.derivative_feedback)

    def control(self) -> IterationControl:
        return IterationControl(
            max_iterations=self.max_iterations,
            rel_tol=self.rel_tol,
            rms_floor=self.rms_floor,
            metric=self.convergence_metric,
        )

    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(
            kind=self.phantom_kind,
            centers=self.phantom_centers,
            widths=self.phantom_widths,
            amplitudes=self.phantom_amplitudes,
            path=self.phantom_path,
            n=self.n_interior,
            x_min=self.x_min,
            delta_x=self.delta_x,
        )

    @property
    def settings_label(self) -> str:
        """Row label such as `delta_data=99 noise=30% alpha=2`."""
        label = f"delta_data={self.delta_data} noise={self.noise_level * 100:g}%"
        if self.attenuation_alpha is not None:
            label += f" alpha={self.attenuation_alpha:g}"
        return label

    @property
    def settings_slug(self) -> str:
        """Directory-safe form of the settings label."""
        slug = f"ddata{self.delta_data}_noise{self.noise_level * 100:g}"
        if self.attenuation_alpha is not None:
            slug += f"_alpha{self.attenuation_alpha:g}"
        return slug.replace(".", "p")


# Response Schemas
class ExperimentResponse(BaseModel):
    method: str
    settings: str
    rms_percent: Optional[float] = None
    iterations_used: int
    per_iteration_rms: List[float]
    converged: bool
    diverged: bool
    estimate: List[float]
    artifacts: List[str] = []


class PhantomResponse(BaseModel):
    label: str
    x: List[float]
    values: List[float]


class HealthCheckResponse(BaseModel):
    status: str
    version: str
    timestamp: datetime
