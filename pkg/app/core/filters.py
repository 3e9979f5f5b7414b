"""
Discrete Kalman and SEEK filter steps on stacked (p_prev, p_curr) states.

The unknown model-error covariance Q is replaced by multiplicative
inflation (1 + gamma) applied at forecast time in both filters. The SEEK
factor is stored already inflated: S_f = sqrt(1 + gamma) M S_a.
"""
from dataclasses import dataclass
from typing import Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.linalg import EigMethod, SymMatrix, spd_inv_sqrt, sym_eig
from app.core.observation import ObservationOperator
from app.exceptions import DimensionError, NumericalBlowUpError, ParameterError, RankCollapseError
from app.utils.logger import get_logger

logger = get_logger(__name__)

Propagator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]
GainForm = Literal["innovation", "information"]


class FilterParams(BaseModel):
    """Observation error R = R_scale I, inflation gamma and the SEEK rank."""

    model_config = ConfigDict(frozen=True)

    R_scale: float = Field(default=0.3, gt=0)
    gamma: float = Field(default=0.01, ge=0)
    rank: int = Field(default=120, ge=1)
    rank_tol: float = Field(default=1e-10, gt=0)
    sigma0: float = Field(default=1.0, ge=0)
    observe_velocity: bool = False
    columnwise_forecast: bool = False
    eig_method: Literal["lapack", "jacobi"] = "lapack"


@dataclass(frozen=True)
class KalmanState:
    """Mean x (2n) and full covariance P (2n x 2n)."""

    x: np.ndarray
    P: SymMatrix

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.P.dimension:
            raise DimensionError(f"Mean of length {x.shape} does not match covariance {self.P.dimension}")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class SeekState:
    """Mean x (2n) and square-root factor S (2n x r)."""

    x: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        s = np.asarray(self.S, dtype=float)
        if s.ndim != 2 or s.shape[0] != x.shape[0]:
            raise DimensionError(f"Factor of shape {s.shape} does not match a mean of length {x.shape[0]}")
        if s.shape[1] < 1:
            raise RankCollapseError("Square-root factor has no columns left")
        if not np.all(np.isfinite(s)):
            raise NumericalBlowUpError("Non-finite square-root factor", step_index=-1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "S", s)

    @property
    def r(self) -> int:
        return self.S.shape[1]

    def covariance(self) -> np.ndarray:
        return self.S @ self.S.T


def apply_propagator(model: Propagator, x: np.ndarray) -> np.ndarray:
    """Apply a dense matrix or a column-wise model to a vector or column block."""
    if isinstance(model, np.ndarray):
        if model.shape[1] != x.shape[0]:
            raise DimensionError(f"Propagator of shape {model.shape} cannot act on {x.shape[0]} rows")
        return model @ x
    return model(x)


def kalman_gain(P: np.ndarray, C: np.ndarray, R_scale: float, form: GainForm = "innovation") -> np.ndarray:
    """
    Kalman gain for R = R_scale I.

    innovation:  K = P C^T (C P C^T + R)^-1
    information: K = (P^-1 + C^T R^-1 C)^-1 C^T R^-1   (needs P invertible)
    """
    m = C.shape[0]
    if form == "innovation":
        cp = C @ P
        innovation_cov = cp @ C.T + R_scale * np.eye(m)
        return np.linalg.solve(innovation_cov, cp).T
    if form == "information":
        information = np.linalg.inv(P) + (C.T @ C) / R_scale
        return np.linalg.solve(information, C.T / R_scale)
    raise ParameterError(f"Unknown gain form: {form}")


def kf_analysis(
    state: KalmanState,
    obs: ObservationOperator,
    y_obs: np.ndarray,
    params: FilterParams,
) -> KalmanState:
    """Kalman analysis in innovation form; P_a = (I - K C) P_f, symmetrised."""
    y_obs = np.asarray(y_obs, dtype=float)
    if y_obs.shape != (obs.m,):
        raise DimensionError(f"Expected {obs.m} observations, got shape {y_obs.shape}")
    if obs.m == 0:
        return state

    P = state.P.entries
    cp = obs.apply(P)  # C P, m x 2n
    innovation_cov = obs.apply(cp.T) + params.R_scale * np.eye(obs.m)
    gain = np.linalg.solve(innovation_cov, cp).T

    innovation = obs.apply(state.x) - y_obs
    x_a = state.x - gain @ innovation
    P_a = P - gain @ cp
    if not np.all(np.isfinite(x_a)):
        raise NumericalBlowUpError("Non-finite Kalman analysis", step_index=-1)
    return KalmanState(x_a, SymMatrix.symmetrized(P_a))


def kf_forecast(state: KalmanState, M: Propagator, params: FilterParams) -> KalmanState:
    """x_f = M x_a, P_f = (1 + gamma) M P_a M^T."""
    x_f = apply_propagator(M, state.x)
    mp = apply_propagator(M, state.P.entries)
    P_f = (1.0 + params.gamma) * apply_propagator(M, mp.T)
    return KalmanState(x_f, SymMatrix.symmetrized(P_f))


def reduce_rank(S: np.ndarray, rank_tol: float, method: EigMethod = "lapack") -> np.ndarray:
    """
    Drop directions of S whose Gram eigenvalue is below rank_tol * l_max.

    S S^T is unchanged; an all-zero factor is returned as is.
    """
    values, vectors = sym_eig(SymMatrix.symmetrized(S.T @ S), method=method)
    top = values[0] if values.size else 0.0
    if top <= 0:
        return S
    rank = int(np.sum(values > rank_tol * top))
    if rank == S.shape[1]:
        return S
    if rank == 0:
        raise RankCollapseError("Square-root factor collapsed to rank 0")
    logger.info("seek rank reduced", previous=S.shape[1], rank=rank)
    return S @ vectors[:, :rank]


def seek_analysis(
    state: SeekState,
    obs: ObservationOperator,
    y_obs: np.ndarray,
    params: FilterParams,
) -> SeekState:
    """
    SEEK analysis with G = I_r + (C S)^T R^-1 (C S):

        x_a = x_f - S G^-1 (C S)^T R^-1 (C x_f - y)
        S_a = S G^-1/2
    """
    y_obs = np.asarray(y_obs, dtype=float)
    if y_obs.shape != (obs.m,):
        raise DimensionError(f"Expected {obs.m} observations, got shape {y_obs.shape}")
    if obs.m == 0:
        return state

    S = reduce_rank(state.S, params.rank_tol, params.eig_method)
    cs = obs.apply(S)
    g = SymMatrix.symmetrized(np.eye(S.shape[1]) + (cs.T @ cs) / params.R_scale)
    # G >= I, so only a non-positive eigenvalue signals a broken factor
    g_inv_sqrt = spd_inv_sqrt(g, tol=0.0, method=params.eig_method).entries

    innovation = obs.apply(state.x) - y_obs
    weights = g_inv_sqrt @ (g_inv_sqrt @ (cs.T @ innovation / params.R_scale))
    x_a = state.x - S @ weights
    if not np.all(np.isfinite(x_a)):
        raise NumericalBlowUpError("Non-finite SEEK analysis", step_index=-1)
    return SeekState(x_a, S @ g_inv_sqrt)


def seek_forecast(state: SeekState, M: Propagator, params: FilterParams) -> SeekState:
    """x_f = M x_a, S_f = sqrt(1 + gamma) M S_a; the rank is preserved."""
    x_f = apply_propagator(M, state.x)
    S_f = np.sqrt(1.0 + params.gamma) * apply_propagator(M, state.S)
    return SeekState(x_f, S_f)


def sine_modes(n: int) -> np.ndarray:
    """Orthonormal eigenvectors of the Dirichlet Laplacian, lowest frequency first."""
    i = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(i, i) / (n + 1))


def mode_frequencies(n: int, delta_x: float) -> np.ndarray:
    """Square roots of the eigenvalues of -Lap, in the order of `sine_modes`."""
    return 2.0 / delta_x * np.sin(0.5 * np.pi * np.arange(1, n + 1) / (n + 1))


def init_sqrt_cov(n: int, rank: int, sigma0: float) -> np.ndarray:
    """
    Initial factor S_0 (2n x rank) of perturbations at rest.

    Column j < n is sigma0 (phi_j, phi_j) / sqrt(2), so S_0^T S_0 = sigma0^2 I
    for rank <= n. Columns past n are zero and drop out at the first rank
    reduction.
    """
    if not 1 <= rank <= 2 * n:
        raise ParameterError(f"Rank must lie in [1, {2 * n}], got {rank}")
    if sigma0 < 0:
        raise ParameterError(f"sigma0 must be non-negative, got {sigma0}")

    modes = sine_modes(n)[:, : min(rank, n)]
    factor = np.zeros((2 * n, rank))
    factor[:, : modes.shape[1]] = sigma0 * np.vstack([modes, modes]) / np.sqrt(2.0)
    return factor


def init_kalman_cov(n: int, delta_x: float, delta_t: float, sigma0: float) -> SymMatrix:
    """
    Full-rank initial covariance for the Kalman filter.

    The at-rest modes of `init_sqrt_cov` are completed by velocity modes
    sigma0 (w_j dt / 2) (-phi_j, phi_j) / sqrt(2), each holding the energy of
    its at-rest twin for theta = 1/4, which makes P_0 invertible.
    """
    if sigma0 < 0:
        raise ParameterError(f"sigma0 must be non-negative, got {sigma0}")
    position = init_sqrt_cov(n, n, sigma0)
    half_steps = 0.5 * delta_t * mode_frequencies(n, delta_x)
    velocity = np.vstack([-position[:n], position[n:]]) * half_steps
    root = np.hstack([position, velocity])
    return SymMatrix.symmetrized(root @ root.T)
