"""
Discrete 1-D wave model.

Interior grid with homogeneous Dirichlet ends, a theta-scheme in time with an
optional artificial viscous attenuation eps * Lap (p_n - p_{n-1}) / dt, and
stepping in both directions of time.

A WaveState always stores the time-ordered pair (p_{n-1}, p_n) with
step_index = n. A forward step returns (p_n, p_{n+1}); a backward step
returns (p_{n-2}, p_{n-1}). Both apply the same update in the order of
integration, so backward(forward(s)) == s when eps == 0, and eps damps in
both directions.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.linalg import solve_tridiagonal
from app.exceptions import DimensionError, NumericalBlowUpError, ParameterError, StabilityError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


DirectionLike = Union[Direction, str]
FeedbackSource = Callable[[int, "WaveState"], Optional[np.ndarray]]


class GridSpec(BaseModel):
    """Uniform interior grid of (x_min, x_max); boundary values are implicit zeros."""

    model_config = ConfigDict(frozen=True)

    x_min: float = -0.5
    x_max: float = 0.5
    n_interior: int = Field(default=99, ge=3)

    @model_validator(mode="after")
    def _check_extent(self) -> "GridSpec":
        if not self.x_max > self.x_min:
            raise ParameterError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        return self

    @property
    def delta_x(self) -> float:
        return (self.x_max - self.x_min) / (self.n_interior + 1)

    @classmethod
    def from_spacing(cls, x_min: float, delta_x: float, n_interior: int) -> "GridSpec":
        """Grid with a prescribed spacing; x_max follows from the node count."""
        if delta_x <= 0:
            raise ParameterError(f"delta_x must be positive, got {delta_x}")
        return cls(x_min=x_min, x_max=x_min + (n_interior + 1) * delta_x, n_interior=n_interior)


class SchemeParams(BaseModel):
    """Time step, horizon, theta and the attenuation exponent of the scheme."""

    model_config = ConfigDict(frozen=True)

    delta_t: float = Field(default=1.0 / 200.0, gt=0)
    n_steps: int = Field(default=200, ge=1)
    theta: float = Field(default=0.25, ge=0.0, le=0.5)
    attenuation_alpha: Optional[float] = Field(default=None, gt=1.0, le=2.0)

    @property
    def final_time(self) -> float:
        return self.n_steps * self.delta_t

    def epsilon(self, grid: GridSpec) -> float:
        """Attenuation coefficient eps = dx^alpha, or 0 without attenuation."""
        if self.attenuation_alpha is None:
            return 0.0
        return grid.delta_x ** self.attenuation_alpha

    def without_attenuation(self) -> "SchemeParams":
        return self.model_copy(update={"attenuation_alpha": None})


@dataclass(frozen=True)
class WaveState:
    """Two consecutive pressure levels (p_{n-1}, p_n) on the interior grid."""

    p_prev: np.ndarray
    p_curr: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        prev = np.asarray(self.p_prev, dtype=float)
        curr = np.asarray(self.p_curr, dtype=float)
        if prev.ndim != 1 or prev.shape != curr.shape:
            raise DimensionError(
                f"State levels must be vectors of equal length, got {prev.shape} and {curr.shape}"
            )
        if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(curr))):
            raise NumericalBlowUpError(
                f"Non-finite pressure values at step {self.step_index}",
                step_index=self.step_index,
            )
        object.__setattr__(self, "p_prev", prev)
        object.__setattr__(self, "p_curr", curr)

    @property
    def size(self) -> int:
        return self.p_curr.shape[0]

    @classmethod
    def at_rest(cls, values: np.ndarray, step_index: int = 0) -> "WaveState":
        """Symmetric start p_prev = p_curr = values (zero initial velocity)."""
        values = np.asarray(values, dtype=float)
        return cls(values.copy(), values.copy(), step_index)

    @classmethod
    def from_stacked(cls, x: np.ndarray, step_index: int = 0) -> "WaveState":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] % 2:
            raise DimensionError(f"Stacked state must have even length, got {x.shape}")
        n = x.shape[0] // 2
        return cls(x[:n], x[n:], step_index)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.p_prev, self.p_curr])

    def velocity(self, delta_t: float) -> np.ndarray:
        return (self.p_curr - self.p_prev) / delta_t


@dataclass(frozen=True)
class Phantom:
    """Initial pressure f0 on the interior grid."""

    values: np.ndarray
    label: str = "phantom"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DimensionError(f"Phantom values must be a vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError(f"Phantom '{self.label}' has non-finite entries")
        object.__setattr__(self, "values", values)


def grid_coordinates(grid: GridSpec) -> np.ndarray:
    """Positions of the interior nodes."""
    return grid.x_min + grid.delta_x * np.arange(1, grid.n_interior + 1)


def check_stability(grid: GridSpec, params: SchemeParams) -> None:
    """Reject explicit-leaning schemes (theta < 1/4) that break the CFL bound."""
    if params.theta >= 0.25:
        return
    bound = grid.delta_x / np.sqrt(1.0 - 4.0 * params.theta)
    if params.delta_t > bound * (1.0 + 1e-12):
        raise StabilityError(
            f"delta_t={params.delta_t} exceeds the stability bound {bound:.6g} "
            f"for theta={params.theta} and delta_x={grid.delta_x:.6g}"
        )


def _laplacian(v: np.ndarray, delta_x: float) -> np.ndarray:
    """Three-point second difference along axis 0 with zero ghost values."""
    out = -2.0 * v
    out[1:] += v[:-1]
    out[:-1] += v[1:]
    return out / (delta_x * delta_x)


def apply_laplacian(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Dirichlet Laplacian (v[i-1] - 2 v[i] + v[i+1]) / dx^2 on interior values."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != grid.n_interior:
        raise DimensionError(f"Expected a vector of length {grid.n_interior}, got shape {v.shape}")
    return _laplacian(v, grid.delta_x)


class ThetaScheme:
    """
    Theta-scheme propagator for one (grid, params) pair.

    The implicit matrix I - theta dt^2 Lap is tridiagonal; each step solves it
    against the right-hand side with the Thomas algorithm.
    """

    def __init__(self, grid: GridSpec, params: SchemeParams):
        check_stability(grid, params)
        self.grid = grid
        self.params = params
        self.epsilon = params.epsilon(grid)

        n = grid.n_interior
        self._implicit: Optional[tuple[np.ndarray, np.ndarray]] = None
        if params.theta > 0:
            coef = params.theta * params.delta_t ** 2 / grid.delta_x ** 2
            self._implicit = (np.full(n, 1.0 + 2.0 * coef), np.full(n - 1, -coef))

        logger.debug(
            "theta scheme ready",
            n_interior=n,
            delta_x=grid.delta_x,
            delta_t=params.delta_t,
            theta=params.theta,
            epsilon=self.epsilon,
        )

    def advance(
        self,
        prev: np.ndarray,
        curr: np.ndarray,
        feedback: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Next level from two levels given in the order of integration."""
        dt = self.params.delta_t
        theta = self.params.theta
        lap_prev = _laplacian(prev, self.grid.delta_x)
        lap_curr = _laplacian(curr, self.grid.delta_x)

        rhs = 2.0 * curr - prev + dt * dt * ((1.0 - 2.0 * theta) * lap_curr + theta * lap_prev)
        if self.epsilon:
            rhs += dt * self.epsilon * (lap_curr - lap_prev)
        if feedback is not None:
            rhs += dt * dt * feedback

        if self._implicit is None:
            return rhs
        diag, off = self._implicit
        return solve_tridiagonal(diag, off, off, rhs)

    def step(
        self,
        state: WaveState,
        direction: DirectionLike = Direction.FORWARD,
        feedback: Optional[np.ndarray] = None,
    ) -> WaveState:
        n = self.grid.n_interior
        if state.size != n:
            raise DimensionError(f"State has {state.size} nodes, grid has {n}")
        if feedback is not None:
            feedback = np.asarray(feedback, dtype=float)
            if feedback.shape != (n,):
                raise DimensionError(f"Feedback must have length {n}, got shape {feedback.shape}")

        if Direction(direction) is Direction.FORWARD:
            new = self.advance(state.p_prev, state.p_curr, feedback)
            return WaveState(state.p_curr, new, state.step_index + 1)
        new = self.advance(state.p_curr, state.p_prev, feedback)
        return WaveState(new, state.p_prev, state.step_index - 1)

    def apply_stacked(self, x: np.ndarray, direction: DirectionLike = Direction.FORWARD) -> np.ndarray:
        """Feedback-free step of stacked (p_prev, p_curr) columns, shape (2n,) or (2n, k)."""
        n = self.grid.n_interior
        x = np.asarray(x, dtype=float)
        if x.shape[0] != 2 * n:
            raise DimensionError(f"Stacked states must have {2 * n} rows, got {x.shape[0]}")
        prev, curr = x[:n], x[n:]
        if Direction(direction) is Direction.FORWARD:
            return np.concatenate([curr, self.advance(prev, curr)])
        return np.concatenate([self.advance(curr, prev), prev])


@lru_cache(maxsize=64)
def get_scheme(grid: GridSpec, params: SchemeParams) -> ThetaScheme:
    """Cached scheme for a (grid, params) pair."""
    return ThetaScheme(grid, params)


def step(
    state: WaveState,
    grid: GridSpec,
    params: SchemeParams,
    direction: DirectionLike = Direction.FORWARD,
    feedback: Optional[np.ndarray] = None,
) -> WaveState:
    """
    One theta-scheme step.

    `feedback` is the assembled correction term; it enters the update as an
    acceleration, i.e. dt^2 * feedback is added to the right-hand side.
    """
    return get_scheme(grid, params).step(state, direction, feedback)


def propagate(
    initial: WaveState,
    grid: GridSpec,
    params: SchemeParams,
    direction: DirectionLike = Direction.FORWARD,
    feedback_source: Optional[FeedbackSource] = None,
    n_steps: Optional[int] = None,
    consumer: Optional[Callable[[WaveState], None]] = None,
    store: bool = True,
) -> list[WaveState]:
    """
    Run `n_steps` steps (params.n_steps by default) from `initial`.

    `feedback_source(step_index, state)` is called before each step with the
    current state. Every state, the initial one included, is passed to
    `consumer`; with store=False only the final state is returned.
    """
    steps = params.n_steps if n_steps is None else n_steps
    if steps < 0:
        raise ParameterError(f"n_steps must be non-negative, got {steps}")

    scheme = get_scheme(grid, params)
    state = initial
    states = [initial]
    if consumer is not None:
        consumer(initial)

    for _ in range(steps):
        feedback = feedback_source(state.step_index, state) if feedback_source else None
        state = scheme.step(state, direction, feedback)
        if consumer is not None:
            consumer(state)
        if store:
            states.append(state)

    return states if store else [state]


def discrete_energy(state: WaveState, grid: GridSpec, params: SchemeParams) -> float:
    """
    Discrete energy of the scheme.

    With A = -Lap, w = (p_curr - p_prev) / dt:
        E = dx/2 * ( |w|^2 + (theta dt^2 - eps dt / 2) <A w, w> + <A p_curr, p_prev> )
    A feedback-free step leaves E unchanged when eps = 0 and lowers it by
    dx * eps / (4 dt) * <A d, d>, d = p_{n+1} - p_{n-1}, when eps > 0.
    """
    if state.size != grid.n_interior:
        raise DimensionError(f"State has {state.size} nodes, grid has {grid.n_interior}")
    dt = params.delta_t
    dx = grid.delta_x
    eps = params.epsilon(grid)

    w = (state.p_curr - state.p_prev) / dt
    a_w = -_laplacian(w, dx)
    a_curr = -_laplacian(state.p_curr, dx)
    weight = params.theta * dt * dt - 0.5 * eps * dt
    return 0.5 * dx * float(w @ w + weight * (w @ a_w) + a_curr @ state.p_prev)


def propagator_matrix(
    grid: GridSpec,
    params: SchemeParams,
    direction: DirectionLike = Direction.FORWARD,
) -> np.ndarray:
    """Dense one-step map M on stacked (p_prev, p_curr), shape (2n, 2n)."""
    n = grid.n_interior
    return get_scheme(grid, params).apply_stacked(np.eye(2 * n), direction)
