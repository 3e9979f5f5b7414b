import numpy as np
import pytest

import app.core.wave_core as wave_core
from app.core.wave_core import (
    Direction,
    GridSpec,
    SchemeParams,
    ThetaScheme,
    WaveState,
    apply_laplacian,
    check_stability,
    discrete_energy,
    grid_coordinates,
    propagate,
    propagator_matrix,
    step,
)
from app.exceptions import DimensionError, NumericalBlowUpError, StabilityError
from tests.conftest import bump


def test_grid_coordinates(reference_grid):
    x = grid_coordinates(reference_grid)
    assert x.shape == (100,)
    assert x[0] == pytest.approx(-0.49)
    assert x[-1] == pytest.approx(0.5)
    assert reference_grid.delta_x == pytest.approx(0.01)


def test_grid_rejects_empty_interval():
    with pytest.raises(ValueError):
        GridSpec(x_min=0.5, x_max=0.5, n_interior=10)


def test_forward_then_backward_returns_initial_state(reference_grid, reference_params):
    """200 steps forward and 200 back restore (f0, f0)."""
    f0 = bump(reference_grid, center=-0.1, width=0.05)
    start = WaveState.at_rest(f0)

    final = propagate(start, reference_grid, reference_params, Direction.FORWARD, store=False)[-1]
    assert final.step_index == 200
    back = propagate(final, reference_grid, reference_params, Direction.BACKWARD, store=False)[-1]

    assert back.step_index == 0
    scale = np.linalg.norm(f0)
    assert np.linalg.norm(back.p_curr - f0) <= 1e-8 * scale
    assert np.linalg.norm(back.p_prev - f0) <= 1e-8 * scale


def test_energy_conserved_without_attenuation(reference_grid, reference_params):
    f0 = bump(reference_grid)
    states = propagate(WaveState.at_rest(f0), reference_grid, reference_params)
    energies = np.array([discrete_energy(s, reference_grid, reference_params) for s in states])

    assert energies[0] > 0
    assert np.max(np.abs(energies - energies[0])) <= 1e-10 * energies[0]


def test_energy_decreases_with_attenuation(reference_grid):
    params = SchemeParams(delta_t=0.005, n_steps=200, theta=0.25, attenuation_alpha=1.8)
    f0 = bump(reference_grid, width=0.02)
    states = propagate(WaveState.at_rest(f0), reference_grid, params)
    energies = np.array([discrete_energy(s, reference_grid, params) for s in states])

    assert np.all(np.diff(energies) <= 1e-14 * energies[0])
    assert energies[-1] < energies[0]


def test_attenuation_coefficient(reference_grid):
    params = SchemeParams(attenuation_alpha=2.0)
    assert params.epsilon(reference_grid) == pytest.approx(1e-4)
    assert params.without_attenuation().epsilon(reference_grid) == 0.0


def test_explicit_step_is_leapfrog(small_grid):
    """theta = 0 reduces to p+ = 2p - p- + dt^2 Lap p."""
    params = SchemeParams(delta_t=0.01, n_steps=1, theta=0.0)
    rng = np.random.default_rng(3)
    prev, curr = rng.standard_normal(39), rng.standard_normal(39)

    new = step(WaveState(prev, curr, 4), small_grid, params).p_curr
    expected = 2 * curr - prev + 0.01 ** 2 * apply_laplacian(curr, small_grid)
    np.testing.assert_allclose(new, expected, atol=1e-12)


def test_implicit_step_satisfies_scheme(small_grid, small_params):
    rng = np.random.default_rng(4)
    prev, curr = rng.standard_normal(39), rng.standard_normal(39)
    dt, theta = small_params.delta_t, small_params.theta

    out = step(WaveState(prev, curr, 1), small_grid, small_params)
    assert out.step_index == 2
    np.testing.assert_array_equal(out.p_prev, curr)

    new = out.p_curr
    lap = lambda v: apply_laplacian(v, small_grid)
    residual = (new - 2 * curr + prev) / dt ** 2 - (theta * lap(new) + (1 - 2 * theta) * lap(curr) + theta * lap(prev))
    assert np.max(np.abs(residual)) <= 1e-8 * np.max(np.abs(lap(curr)))


def test_backward_step_shifts_levels(small_grid, small_params):
    rng = np.random.default_rng(5)
    state = WaveState(rng.standard_normal(39), rng.standard_normal(39), 7)
    back = step(state, small_grid, small_params, Direction.BACKWARD)

    assert back.step_index == 6
    np.testing.assert_array_equal(back.p_curr, state.p_prev)


def test_propagator_matrices_are_inverse(small_grid, small_params):
    forward = propagator_matrix(small_grid, small_params, Direction.FORWARD)
    backward = propagator_matrix(small_grid, small_params, Direction.BACKWARD)
    np.testing.assert_allclose(backward @ forward, np.eye(78), atol=1e-10)


def test_propagator_matrix_matches_step(small_grid, small_params):
    rng = np.random.default_rng(6)
    state = WaveState(rng.standard_normal(39), rng.standard_normal(39), 0)
    matrix = propagator_matrix(small_grid, small_params)
    stepped = step(state, small_grid, small_params)
    np.testing.assert_allclose(matrix @ state.stacked(), stepped.stacked(), atol=1e-12)


def test_feedback_enters_as_acceleration(small_grid):
    """With theta = 0 the feedback adds dt^2 * F to the next level."""
    params = SchemeParams(delta_t=0.01, n_steps=1, theta=0.0)
    state = WaveState.at_rest(np.zeros(39))
    feedback = np.zeros(39)
    feedback[10] = 2.0

    out = step(state, small_grid, params, feedback=feedback)
    assert out.p_curr[10] == pytest.approx(2.0 * 0.01 ** 2)


def test_propagate_stores_every_level(small_grid, small_params, small_phantom):
    seen = []
    states = propagate(
        WaveState.at_rest(small_phantom.values),
        small_grid,
        small_params,
        consumer=lambda s: seen.append(s.step_index),
    )
    assert len(states) == small_params.n_steps + 1
    assert seen == list(range(small_params.n_steps + 1))


def test_stability_bound():
    grid = GridSpec.from_spacing(-0.5, 0.01, 100)
    with pytest.raises(StabilityError):
        check_stability(grid, SchemeParams(delta_t=0.02, theta=0.1))
    check_stability(grid, SchemeParams(delta_t=0.005, theta=0.0))
    check_stability(grid, SchemeParams(delta_t=1.0, theta=0.25))


def test_state_rejects_non_finite():
    with pytest.raises(NumericalBlowUpError) as exc_info:
        WaveState(np.array([0.0, np.nan, 0.0]), np.zeros(3), 5)
    assert exc_info.value.step_index == 5


def test_step_dimension_mismatch(small_grid, small_params):
    with pytest.raises(DimensionError):
        step(WaveState.at_rest(np.zeros(10)), small_grid, small_params)


def test_laplacian_dirichlet_ends():
    grid = GridSpec.from_spacing(0.0, 1.0, 3)
    np.testing.assert_allclose(apply_laplacian(np.ones(3), grid), [-1.0, 0.0, -1.0])


def test_explicit_step_by_hand():
    grid = GridSpec.from_spacing(0.0, 1.0, 3)
    params = SchemeParams(delta_t=1.0, n_steps=1, theta=0.0)
    bump_state = WaveState.at_rest(np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(step(bump_state, grid, params).p_curr, [1.0, -1.0, 1.0])


def test_implicit_step_solves_per_right_hand_side(small_grid, small_params, monkeypatch):
    shapes = []
    solver = wave_core.solve_tridiagonal

    def recording_solver(diag, lower, upper, rhs):
        shapes.append(np.shape(rhs))
        return solver(diag, lower, upper, rhs)

    monkeypatch.setattr(wave_core, "solve_tridiagonal", recording_solver)
    scheme = ThetaScheme(small_grid, small_params)
    n = small_grid.n_interior
    assert not any(isinstance(v, np.ndarray) and v.ndim == 2 for v in vars(scheme).values())
    assert shapes == []

    scheme.step(WaveState.at_rest(bump(small_grid)))
    scheme.apply_stacked(np.ones((2 * n, 3)))
    assert shapes == [(n,), (n, 3)]


@pytest.mark.parametrize("theta", [0.0, 0.25, 0.5])
def test_step_is_linear(small_grid, theta):
    params = SchemeParams(delta_t=0.0125, n_steps=1, theta=theta, attenuation_alpha=1.5)
    rng = np.random.default_rng(11)
    u = WaveState(rng.standard_normal(39), rng.standard_normal(39), 3)
    v = WaveState(rng.standard_normal(39), rng.standard_normal(39), 3)
    a, b = 0.7, -2.3
    combo = WaveState(a * u.p_prev + b * v.p_prev, a * u.p_curr + b * v.p_curr, 3)

    for direction in Direction:
        su, sv = step(u, small_grid, params, direction), step(v, small_grid, params, direction)
        out = step(combo, small_grid, params, direction)
        np.testing.assert_allclose(out.p_curr, a * su.p_curr + b * sv.p_curr, atol=1e-10)
        np.testing.assert_allclose(out.p_prev, a * su.p_prev + b * sv.p_prev, atol=1e-10)


def test_laplacian_is_symmetric_and_non_positive(small_grid):
    rng = np.random.default_rng(12)
    for _ in range(20):
        u, v = rng.standard_normal(39), rng.standard_normal(39)
        lu, lv = apply_laplacian(u, small_grid), apply_laplacian(v, small_grid)
        assert lu @ v == pytest.approx(u @ lv, rel=1e-10)
        assert lv @ v <= 0.0
