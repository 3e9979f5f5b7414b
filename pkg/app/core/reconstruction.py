"""
Initial-data reconstruction methods.

- Time Reversal: one backward pass with the recorded values imposed at the sensors
- Back-and-Forth Nudging: nudged forward/backward passes iterated on f0
- Kalman filter: one forward assimilation, then transport back to t = 0
- Back-and-Forth SEEK: reduced-rank filtering in both directions, iterated on f0

Every method returns a ReconstructionResult; when the truth is supplied the
per-iteration RMS error is tracked against it.
"""
from dataclasses import dataclass, field
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.filters import (
    FilterParams,
    KalmanState,
    Propagator,
    SeekState,
    init_kalman_cov,
    init_sqrt_cov,
    kf_analysis,
    kf_forecast,
    seek_analysis,
    seek_forecast,
)
from app.core.observation import ObservationRecord, SensorArray, observation_operator
from app.core.wave_core import (
    Direction,
    DirectionLike,
    FeedbackSource,
    GridSpec,
    Phantom,
    SchemeParams,
    WaveState,
    get_scheme,
    propagate,
    propagator_matrix,
)
from app.exceptions import DimensionError, ParameterError, UndefinedMetricError
from app.utils.logger import get_logger

logger = get_logger(__name__)

DIVERGENCE_FACTOR = 10.0


class NudgingParams(BaseModel):
    """Nudging gain k of the feedback -k C*(C p - p_obs)."""

    model_config = ConfigDict(frozen=True)

    gain: float = Field(gt=0)
    use_derivative_feedback: bool = True

    @classmethod
    def from_step_weight(cls, weight: float, delta_t: float, use_derivative_feedback: bool = True) -> "NudgingParams":
        """Gain from the per-step correction weight k dt^2."""
        return cls(gain=weight / delta_t ** 2, use_derivative_feedback=use_derivative_feedback)

    @classmethod
    def default_for(cls, delta_t: float, use_derivative_feedback: bool = True) -> "NudgingParams":
        """Per-step weight 0.9 dt, i.e. k = 0.9 / dt."""
        return cls.from_step_weight(0.9 * delta_t, delta_t, use_derivative_feedback)


class IterationControl(BaseModel):
    """
    Stop rule of the back-and-forth loops.

    With a truth, the loop stops once the RMS error moves by less than
    rel_tol relative to the previous iterate, or drops below rms_floor
    percent. Without one, the relative size of the update is compared to
    rel_tol instead.
    """

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=100, ge=1)
    rel_tol: float = Field(default=1e-3, gt=0)
    rms_floor: float = Field(default=1e-2, ge=0)
    metric: Literal["rms-change"] = "rms-change"


@dataclass
class ReconstructionResult:
    """
    Reconstructed f0 and its history.

    per_iteration_rms holds the RMS error (percent) against the truth when it
    is known, otherwise the relative size of each update (percent).
    """

    estimate: np.ndarray
    method: str
    iterations_used: int
    per_iteration_rms: list[float]
    rms_percent: Optional[float] = None
    per_iteration_change: list[float] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    def __post_init__(self):
        if not self.per_iteration_rms:
            raise ParameterError("A reconstruction result needs at least one iteration")

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "rms_percent": self.rms_percent,
            "iterations_used": self.iterations_used,
            "per_iteration_rms": list(self.per_iteration_rms),
            "per_iteration_change": list(self.per_iteration_change),
            "converged": self.converged,
            "diverged": self.diverged,
            "estimate": self.estimate.tolist(),
        }


def relative_rms(estimate: np.ndarray, truth: np.ndarray) -> float:
    """100 * |estimate - truth| / |truth|."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionError(f"Estimate {estimate.shape} and truth {truth.shape} differ in shape")
    reference = float(np.linalg.norm(truth))
    if reference == 0.0:
        raise UndefinedMetricError("Relative RMS is undefined for a zero truth")
    return 100.0 * float(np.linalg.norm(estimate - truth)) / reference


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(new)), float(np.linalg.norm(old)))
    if scale == 0.0:
        return 0.0
    return 100.0 * float(np.linalg.norm(new - old)) / scale


class _IterationMonitor:
    """Convergence and divergence bookkeeping for the back-and-forth loops."""

    def __init__(self, method: str, control: IterationControl, initial: np.ndarray, truth: Optional[np.ndarray]):
        self.method = method
        self.control = control
        self.truth = truth
        self.previous = np.asarray(initial, dtype=float).copy()
        self.best = self.previous
        self.scores: list[float] = []
        self.changes: list[float] = []
        self.converged = False
        self.diverged = False

    def update(self, estimate: np.ndarray) -> bool:
        """Record an iterate; returns True when the loop should stop."""
        change = _relative_change(estimate, self.previous)
        score = relative_rms(estimate, self.truth) if self.truth is not None else change
        if not self.scores or score < min(self.scores):
            self.best = estimate.copy()
        self.changes.append(change)
        self.scores.append(score)
        self.previous = estimate.copy()

        logger.info(
            "reconstruction iteration",
            method=self.method,
            iteration=len(self.scores),
            change_percent=change,
            rms_percent=score if self.truth is not None else None,
        )

        if change == 0.0:
            self.converged = True
        elif self.truth is None:
            self.converged = change < 100.0 * self.control.rel_tol
        elif score < self.control.rms_floor:
            self.converged = True
        elif len(self.scores) > 1:
            before = self.scores[-2]
            self.converged = before == 0.0 or abs(score - before) / before < self.control.rel_tol
        if self.converged:
            return True

        if score > DIVERGENCE_FACTOR * min(self.scores):
            self.diverged = True
            logger.warning(
                "reconstruction diverged",
                method=self.method,
                iteration=len(self.scores),
                score=score,
                best=min(self.scores),
            )
            return True
        return False

    def result(self, latest: np.ndarray) -> ReconstructionResult:
        estimate = self.best if self.diverged else latest
        rms = relative_rms(estimate, self.truth) if self.truth is not None else None
        return ReconstructionResult(
            estimate=estimate,
            method=self.method,
            iterations_used=len(self.scores),
            per_iteration_rms=list(self.scores),
            rms_percent=rms,
            per_iteration_change=list(self.changes),
            converged=self.converged,
            diverged=self.diverged,
        )


def _check_inputs(record: ObservationRecord, grid: GridSpec, params: SchemeParams, sensors: SensorArray) -> None:
    if record.n_levels < params.n_steps + 1:
        raise DimensionError(
            f"Record holds {record.n_levels} levels, {params.n_steps + 1} are needed"
        )
    if record.samples.shape[1] != sensors.m:
        raise DimensionError(f"Record has {record.samples.shape[1]} sensors, array has {sensors.m}")
    if not np.array_equal(record.sensor_indices, sensors.indices):
        raise DimensionError(
            f"Record was taken at nodes {record.sensor_indices.tolist()}, sensors sit at {sensors.indices.tolist()}"
        )
    if sensors.m and sensors.indices[-1] >= grid.n_interior:
        raise DimensionError(f"Sensor index {int(sensors.indices[-1])} outside the grid")


def _check_guess(guess: Phantom, grid: GridSpec) -> np.ndarray:
    if guess.values.shape[0] != grid.n_interior:
        raise DimensionError(f"Initial guess has {guess.values.shape[0]} nodes, grid has {grid.n_interior}")
    return guess.values.copy()


def _single_pass_result(
    method: str,
    estimate: np.ndarray,
    initial: np.ndarray,
    truth: Optional[np.ndarray],
) -> ReconstructionResult:
    change = _relative_change(estimate, initial)
    rms = relative_rms(estimate, truth) if truth is not None else None
    logger.info("reconstruction finished", method=method, rms_percent=rms)
    return ReconstructionResult(
        estimate=estimate,
        method=method,
        iterations_used=1,
        per_iteration_rms=[change if rms is None else rms],
        rms_percent=rms,
        per_iteration_change=[change],
        converged=True,
    )


def time_reversal(
    record: ObservationRecord,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    final_guess: Optional[WaveState] = None,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """
    One backward pass from the final state (zero by default) with the
    recorded values imposed at the sensor nodes of every level.
    """
    _check_inputs(record, grid, params, sensors)
    n_steps = params.n_steps
    n = grid.n_interior
    idx = sensors.indices

    if final_guess is None:
        prev, curr = np.zeros(n), np.zeros(n)
    else:
        if final_guess.size != n:
            raise DimensionError(f"Final guess has {final_guess.size} nodes, grid has {n}")
        prev, curr = final_guess.p_prev.copy(), final_guess.p_curr.copy()
    prev[idx] = record.at(n_steps - 1)
    curr[idx] = record.at(n_steps)
    state = WaveState(prev, curr, n_steps)

    scheme = get_scheme(grid, params)
    for _ in range(n_steps):
        state = scheme.step(state, Direction.BACKWARD)
        imposed = state.p_prev.copy()
        imposed[idx] = record.at(state.step_index - 1)
        state = WaveState(imposed, state.p_curr, state.step_index)

    return _single_pass_result("TR", state.p_curr.copy(), np.zeros(n), truth)


def nudging_feedback(
    record: ObservationRecord,
    sensors: SensorArray,
    nudging: NudgingParams,
    n: int,
    delta_t: float,
    direction: DirectionLike,
) -> FeedbackSource:
    """
    Feedback -k C*(innovation) for the nudged scheme.

    The innovation is taken at the current level of integration, or as its
    difference quotient with the previous level of integration when
    derivative feedback is on. Measuring it along the direction of
    integration flips the sign of the backward correction with respect to
    physical time, so the correction damps in both passes.
    """
    idx = sensors.indices
    forward = Direction(direction) is Direction.FORWARD

    def feedback(step_index: int, state: WaveState) -> np.ndarray:
        if forward:
            curr, prev = state.p_curr, state.p_prev
            curr_level, prev_level = step_index, step_index - 1
        else:
            curr, prev = state.p_prev, state.p_curr
            curr_level, prev_level = step_index - 1, step_index

        innovation = curr[idx] - record.at(curr_level)
        if nudging.use_derivative_feedback:
            innovation = (innovation - (prev[idx] - record.at(prev_level))) / delta_t

        correction = np.zeros(n)
        correction[idx] = -nudging.gain * innovation
        return correction

    return feedback


def nudging_pass(
    initial: WaveState,
    record: ObservationRecord,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    nudging: NudgingParams,
    direction: DirectionLike,
    store: bool = True,
) -> list[WaveState]:
    """Nudged propagation over the whole record in one direction."""
    _check_inputs(record, grid, params, sensors)
    source = nudging_feedback(record, sensors, nudging, grid.n_interior, params.delta_t, direction)
    return propagate(initial, grid, params, direction, feedback_source=source, store=store)


def bfn_reconstruct(
    record: ObservationRecord,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    nudging: NudgingParams,
    control: IterationControl,
    initial_guess: Phantom,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """
    Back-and-forth nudging: each forward pass restarts at rest from the
    latest estimate, each backward pass starts from the forward final state,
    and the backward pass's t = 0 pressure becomes the next estimate.
    """
    _check_inputs(record, grid, params, sensors)
    estimate = _check_guess(initial_guess, grid)
    monitor = _IterationMonitor("BFN", control, estimate, truth)

    for _ in range(control.max_iterations):
        forward_final = nudging_pass(
            WaveState.at_rest(estimate), record, grid, params, sensors, nudging, Direction.FORWARD, store=False
        )[-1]
        backward_final = nudging_pass(
            forward_final, record, grid, params, sensors, nudging, Direction.BACKWARD, store=False
        )[-1]
        estimate = backward_final.p_curr.copy()
        if monitor.update(estimate):
            break

    return monitor.result(estimate)


def _filter_data(record: ObservationRecord, level: int, velocity: bool) -> np.ndarray:
    return record.velocity_at(level) if velocity else record.at(level)


def kf_reconstruct(
    record: ObservationRecord,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    filter_params: FilterParams,
    initial_guess: Phantom,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """
    One forward Kalman assimilation over the record; the final analysis is
    carried back to t = 0 with the feedback-free backward scheme.
    """
    _check_inputs(record, grid, params, sensors)
    guess = _check_guess(initial_guess, grid)
    n = grid.n_interior
    n_steps = params.n_steps

    obs = observation_operator(sensors, grid, params.delta_t, filter_params.observe_velocity)
    model = propagator_matrix(grid, params, Direction.FORWARD)
    prior = init_kalman_cov(n, grid.delta_x, params.delta_t, filter_params.sigma0)
    state = KalmanState(WaveState.at_rest(guess).stacked(), prior)

    for level in range(n_steps + 1):
        if level > 0:
            state = kf_forecast(state, model, filter_params)
        state = kf_analysis(state, obs, _filter_data(record, level, filter_params.observe_velocity), filter_params)
    logger.debug("kalman pass finished", levels=n_steps + 1, trace=float(np.trace(state.P.entries)))

    final = WaveState.from_stacked(state.x, n_steps)
    start = propagate(final, grid, params, Direction.BACKWARD, store=False)[-1]
    return _single_pass_result("KF", start.p_curr.copy(), guess, truth)


def _seek_model(grid: GridSpec, params: SchemeParams, filter_params: FilterParams, direction: Direction) -> Propagator:
    if filter_params.columnwise_forecast:
        scheme = get_scheme(grid, params)
        return lambda columns: scheme.apply_stacked(columns, direction)
    return propagator_matrix(grid, params, direction)


def bf_seek_reconstruct(
    record: ObservationRecord,
    grid: GridSpec,
    params: SchemeParams,
    sensors: SensorArray,
    filter_params: FilterParams,
    control: IterationControl,
    initial_guess: Phantom,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """
    Back-and-forth SEEK.

    The forward pass assimilates levels 0..N, the backward pass levels
    N-1..0 with the backward scheme. Mean and square-root factor are handed
    over at both turns; at t = 0 the velocity is reset to zero. The factor
    starts on the at-rest modes only, since every forward pass restarts at
    rest; with noisy data and no attenuation the carried factor can grow
    without bound, which the monitor reports as divergence.
    """
    _check_inputs(record, grid, params, sensors)
    estimate = _check_guess(initial_guess, grid)
    n = grid.n_interior
    n_steps = params.n_steps
    velocity = filter_params.observe_velocity

    obs = observation_operator(sensors, grid, params.delta_t, velocity)
    forward_model = _seek_model(grid, params, filter_params, Direction.FORWARD)
    backward_model = _seek_model(grid, params, filter_params, Direction.BACKWARD)
    factor = init_sqrt_cov(n, min(filter_params.rank, 2 * n), filter_params.sigma0)
    monitor = _IterationMonitor("BF-SEEK", control, estimate, truth)

    for _ in range(control.max_iterations):
        state = SeekState(WaveState.at_rest(estimate).stacked(), factor)
        for level in range(n_steps + 1):
            if level > 0:
                state = seek_forecast(state, forward_model, filter_params)
            state = seek_analysis(state, obs, _filter_data(record, level, velocity), filter_params)
        for level in range(n_steps - 1, -1, -1):
            state = seek_forecast(state, backward_model, filter_params)
            state = seek_analysis(state, obs, _filter_data(record, level, velocity), filter_params)

        factor = state.S
        estimate = state.x[n:].copy()
        logger.debug("bf-seek turn", rank=state.r, spread=float(np.sum(factor * factor)))
        if monitor.update(estimate):
            break

    return monitor.result(estimate)
