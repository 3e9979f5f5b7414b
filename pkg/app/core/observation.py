"""
Sensor geometry, synthetic records and noise.

Sensors sit on interior nodes offset, offset + delta_data, ... The
observation operator reads p_curr (or the discrete velocity) at those
nodes from stacked (p_prev, p_curr) states.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.core.wave_core import (
    Direction,
    GridSpec,
    Phantom,
    SchemeParams,
    WaveState,
    propagate,
)
from app.exceptions import DimensionError, ParameterError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class NoiseSpec(BaseModel):
    """Additive white Gaussian noise of level `level` (0.30 for 30%)."""

    model_config = ConfigDict(frozen=True)

    level: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0


@dataclass(frozen=True)
class SensorArray:
    """Interior node indices carrying a sensor."""

    indices: np.ndarray
    delta_data: int
    offset: int = 0

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=int)
        if indices.ndim != 1:
            raise DimensionError("Sensor indices must be a vector")
        if indices.size > 1 and np.any(np.diff(indices) <= 0):
            raise ParameterError("Sensor indices must be strictly increasing")
        object.__setattr__(self, "indices", indices)

    @property
    def m(self) -> int:
        return int(self.indices.size)


def build_sensor_array(grid: GridSpec, delta_data: int, offset: int = 0) -> SensorArray:
    """
    Sensors every `delta_data` interior nodes starting at `offset`.

    delta_data larger than the grid leaves the single sensor at `offset`.
    """
    if delta_data < 1:
        raise ParameterError(f"delta_data must be at least 1, got {delta_data}")
    if not 0 <= offset < grid.n_interior:
        raise ParameterError(f"Sensor offset {offset} outside [0, {grid.n_interior})")
    indices = np.arange(offset, grid.n_interior, delta_data)
    logger.debug("sensor array built", delta_data=delta_data, offset=offset, count=int(indices.size))
    return SensorArray(indices=indices, delta_data=delta_data, offset=offset)


def observe(state: WaveState, sensors: SensorArray) -> np.ndarray:
    """Pressure p_curr restricted to the sensor nodes."""
    if sensors.m and (sensors.indices[-1] >= state.size or sensors.indices[0] < 0):
        raise DimensionError(
            f"Sensor index {int(sensors.indices[-1])} outside a state of {state.size} nodes"
        )
    return state.p_curr[sensors.indices].copy()


@dataclass(frozen=True)
class ObservationOperator:
    """Linear map C from stacked (p_prev, p_curr) states to sensor readings."""

    indices: np.ndarray
    n: int
    velocity: bool = False
    delta_t: float = 1.0

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """C x for a stacked state (2n,) or a block of stacked columns (2n, k)."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != 2 * self.n:
            raise DimensionError(f"Expected {2 * self.n} rows, got {x.shape[0]}")
        curr = x[self.n + self.indices]
        if not self.velocity:
            return curr
        return (curr - x[self.indices]) / self.delta_t

    def matrix(self) -> np.ndarray:
        c = np.zeros((self.m, 2 * self.n))
        rows = np.arange(self.m)
        if self.velocity:
            c[rows, self.n + self.indices] = 1.0 / self.delta_t
            c[rows, self.indices] = -1.0 / self.delta_t
        else:
            c[rows, self.n + self.indices] = 1.0
        return c


def observation_operator(
    sensors: SensorArray,
    grid: GridSpec,
    delta_t: float,
    velocity: bool = False,
) -> ObservationOperator:
    if sensors.m and sensors.indices[-1] >= grid.n_interior:
        raise DimensionError(f"Sensor index {int(sensors.indices[-1])} outside the grid")
    return ObservationOperator(sensors.indices, grid.n_interior, velocity, delta_t)


@dataclass(frozen=True)
class ObservationRecord:
    """
    Sensor readings at every stored time level (rows) and sensor (columns).

    `clean_samples` keeps the noiseless record so the same data can be
    re-noised with another seed.
    """

    samples: np.ndarray
    delta_t: float
    sensor_indices: np.ndarray
    noise_level: float = 0.0
    seed: int = 0
    clean_samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        indices = np.asarray(self.sensor_indices, dtype=int)
        if samples.ndim != 2 or samples.shape[1] != indices.size:
            raise DimensionError(
                f"Samples must have one column per sensor ({indices.size}), got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ParameterError("Observation record has non-finite samples")
        clean = samples if self.clean_samples is None else np.asarray(self.clean_samples, dtype=float)
        if clean.shape != samples.shape:
            raise DimensionError("Clean and noisy samples differ in shape")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sensor_indices", indices)
        object.__setattr__(self, "clean_samples", clean)

    @property
    def n_levels(self) -> int:
        return self.samples.shape[0]

    def at(self, level: int) -> np.ndarray:
        """Readings at a time level; level -1 (symmetric start) reads level 0."""
        if level < -1 or level >= self.n_levels:
            raise DimensionError(f"Time level {level} outside the record (0..{self.n_levels - 1})")
        return self.samples[max(level, 0)]

    def velocity_at(self, level: int) -> np.ndarray:
        """Backward-differenced readings (y_level - y_{level-1}) / dt."""
        return (self.at(level) - self.at(level - 1)) / self.delta_t

    def scaled(self, factor: float) -> "ObservationRecord":
        return ObservationRecord(
            samples=factor * self.samples,
            delta_t=self.delta_t,
            sensor_indices=self.sensor_indices,
            noise_level=self.noise_level,
            seed=self.seed,
            clean_samples=factor * self.clean_samples,
        )

    def to_frame(self) -> pd.DataFrame:
        levels = np.arange(self.n_levels)
        frame = pd.DataFrame(self.samples, columns=[f"s{j}" for j in range(self.samples.shape[1])])
        frame.insert(0, "t", levels * self.delta_t)
        frame.insert(0, "step", levels)
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write `step,t,s0,s1,...` with one row per time level."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @classmethod
    def from_csv(
        cls,
        path: Union[str, Path],
        sensor_indices: np.ndarray,
        noise_level: float = 0.0,
        seed: int = 0,
    ) -> "ObservationRecord":
        frame = pd.read_csv(path)
        if list(frame.columns[:2]) != ["step", "t"]:
            raise DimensionError(f"{path}: expected leading columns 'step,t'")
        times = frame["t"].to_numpy()
        delta_t = float(times[1] - times[0]) if times.size > 1 else 1.0
        return cls(
            samples=frame.iloc[:, 2:].to_numpy(dtype=float),
            delta_t=delta_t,
            sensor_indices=sensor_indices,
            noise_level=noise_level,
            seed=seed,
        )


def add_noise(record: ObservationRecord, noise: NoiseSpec) -> ObservationRecord:
    """
    Re-noise the clean record: sigma = level * RMS of the whole clean record.

    Deterministic for a given seed; level 0 returns the clean record.
    """
    if noise.level < 0:
        raise ParameterError(f"Noise level must be non-negative, got {noise.level}")

    clean = record.clean_samples
    if noise.level == 0 or clean.size == 0:
        samples = clean.copy()
    else:
        rms = float(np.sqrt(np.mean(clean ** 2)))
        rng = np.random.default_rng(noise.seed)
        samples = clean + noise.level * rms * rng.standard_normal(clean.shape)
        logger.debug("noise added", level=noise.level, sigma=noise.level * rms, seed=noise.seed)

    return ObservationRecord(
        samples=samples,
        delta_t=record.delta_t,
        sensor_indices=record.sensor_indices,
        noise_level=noise.level,
        seed=noise.seed,
        clean_samples=clean,
    )


def record_run(
    phantom: Phantom,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    noise: Optional[NoiseSpec] = None,
    attenuate: bool = False,
) -> ObservationRecord:
    """
    Run the true model from f0 at rest and sample the sensors at every level.

    Data come from the unattenuated physics unless `attenuate` is set.
    """
    if phantom.values.shape[0] != grid.n_interior:
        raise DimensionError(
            f"Phantom has {phantom.values.shape[0]} nodes, grid has {grid.n_interior}"
        )
    truth_params = params if attenuate else params.without_attenuation()

    rows: list[np.ndarray] = []
    propagate(
        WaveState.at_rest(phantom.values),
        grid,
        truth_params,
        Direction.FORWARD,
        consumer=lambda state: rows.append(observe(state, sensors)),
        store=False,
    )
    record = ObservationRecord(
        samples=np.vstack(rows),
        delta_t=params.delta_t,
        sensor_indices=sensors.indices,
    )
    logger.info(
        "synthetic record",
        phantom=phantom.label,
        levels=record.n_levels,
        sensors=sensors.m,
        noise_level=noise.level if noise else 0.0,
    )
    return add_noise(record, noise) if noise is not None else record
