"""Tests for the monotone level-set stepper and redistancing."""
import math

import numpy as np
import pytest

from frontflow.solvers.exceptions import CFLViolation, GridError
from frontflow.solvers.grid import (
    OccupancyHistory,
    ScalarField,
    ShapeSpec,
    build_grid,
    effective_radius,
    indicator,
    signed_distance_init,
    volume,
)
from frontflow.solvers.levelset import (
    StepperConfig,
    cfl_dt,
    curvature_term,
    gradient_upwind,
    max_step,
    median_curvature,
    redistance,
    solve_frozen,
    step,
)
from frontflow.solvers.velocity import (
    Constant,
    CurvatureOnly,
    Dislocation,
    VelocityProvider,
    gaussian_kernel,
    mexican_hat_kernel,
)


def _ball(grid, radius):
    return signed_distance_init(grid, ShapeSpec.ball((0.0,) * grid.dim, radius))


def _radii(history):
    return np.array([effective_radius(volume(indicator(f)), history.grid.dim) for f in history.fields])


def _frozen(grid, u0):
    return OccupancyHistory.constant(grid, indicator(u0))


@pytest.mark.parametrize('sign', [1.0, -1.0])
def test_gradient_upwind_linear(sign):
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    u = ScalarField(grid, 0.5 + grid.coordinates[0])
    g = gradient_upwind(u, sign)
    np.testing.assert_allclose(g.values[1:-1, 1:-1], 1.0, rtol=1e-12)


def test_gradient_upwind_constant():
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    np.testing.assert_array_equal(gradient_upwind(ScalarField.constant(grid, 3.0), 1.0).values, 0.0)


def test_gradient_upwind_cone():
    grid = build_grid(2, 1.0, 101, 1.0, 0.1)
    u = ScalarField(grid, -grid.radius)
    g = gradient_upwind(u, 1.0).values
    x, y = grid.coordinates
    mask = (grid.radius >= 0.3) & (np.abs(x) >= 2 * grid.spacing) & (np.abs(y) >= 2 * grid.spacing)
    mask &= ~grid.boundary_mask(1)
    np.testing.assert_allclose(g[mask], 1.0, atol=0.1)


def test_curvature_term_linear_is_zero():
    grid = build_grid(2, 1.0, 41, 1.0, 0.1)
    u = ScalarField(grid, 0.3 * grid.coordinates[0] - 0.7 * grid.coordinates[1] + 0.2)
    np.testing.assert_allclose(curvature_term(u, grid.spacing).values, 0.0, atol=1e-12)


def test_curvature_term_of_circles():
    grid = build_grid(2, 1.0, 101, 1.0, 0.1)
    u = ScalarField(grid, 0.5 - grid.radius)
    kappa = curvature_term(u, grid.spacing).values
    r = grid.radius
    mask = (r >= 4 * grid.spacing) & (r <= 0.8)
    assert np.all(np.abs(kappa[mask] + 1.0 / r[mask]) <= 0.1 / r[mask])


def test_curvature_term_ignores_constants(rng):
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    u = ScalarField(grid, rng.normal(size=grid.shape))
    shifted = u.with_values(u.values + 1.0)
    np.testing.assert_allclose(curvature_term(shifted, grid.spacing).values,
                               curvature_term(u, grid.spacing).values, rtol=0, atol=1e-9)
    np.testing.assert_array_equal(curvature_term(u, grid.spacing).values[0], 0.0)


def test_median_curvature_of_circles():
    grid = build_grid(2, 1.0, 101, 1.0, 0.1)
    u = ScalarField(grid, 0.5 - grid.radius)
    kappa = median_curvature(u).values
    r = grid.radius
    mask = (r >= 0.3) & (r <= 0.7)
    np.testing.assert_allclose(kappa[mask], -1.0 / r[mask], rtol=0.15)
    with pytest.raises(GridError):
        median_curvature(ScalarField.constant(build_grid(3, 1.0, 5, 1.0, 0.1), 0.0))


def test_cfl_dt_formula():
    assert cfl_dt(1.0, 0.01, False, 0.5, 2) == pytest.approx(0.5 * 0.01 / math.sqrt(2))
    degenerate = cfl_dt(0.0, 0.01, False, 0.5, 2)
    assert math.isfinite(degenerate) and degenerate > 1e10
    assert cfl_dt(1.0, 0.01, True, 0.5, 2) <= 1.25e-5 * 0.5


def test_stepper_config_validation():
    with pytest.raises(GridError):
        StepperConfig(cfl_safety=1.5)
    with pytest.raises(GridError):
        StepperConfig(grad_regularization=0.0)
    with pytest.raises(GridError):
        StepperConfig(curvature_scheme='spectral')
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    assert StepperConfig().eps_g(grid) == grid.spacing


def test_step_trivial_cases(rng):
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    config = StepperConfig()
    u = ScalarField(grid, rng.normal(size=grid.shape))
    np.testing.assert_array_equal(step(u, ScalarField.constant(grid, 0.0), config, 0.1).values, u.values)

    flat = ScalarField.constant(grid, 0.25)
    c = ScalarField(grid, rng.normal(size=grid.shape))
    dt = max_step(c.max_abs(), grid, config)
    np.testing.assert_array_equal(step(flat, c, config, dt).values, flat.values)


def test_step_moves_front_at_unit_speed():
    grid = build_grid(2, 1.0, 201, 1.0, 0.1)
    u0 = _ball(grid, 0.3)
    config = StepperConfig()
    dt = max_step(1.0, grid, config)
    u1 = step(u0, ScalarField.constant(grid, 1.0), config, dt)
    row = u1.values[100:, 100]
    radius = np.interp(0.0, -row, grid.axis[100:])
    assert radius == pytest.approx(0.3 + dt, abs=grid.spacing)


def test_step_rejects_cfl_violation():
    grid = build_grid(2, 1.0, 21, 1.0, 0.1)
    u0 = _ball(grid, 0.3)
    config = StepperConfig()
    limit = max_step(1.0, grid, config, safety=1.0)
    with pytest.raises(CFLViolation):
        step(u0, ScalarField.constant(grid, 1.0), config, 2.0 * limit)


def test_step_preserves_order(rng):
    grid = build_grid(2, 1.0, 31, 1.0, 0.1)
    u0 = _ball(grid, 0.3)
    kernel = mexican_hat_kernel(grid, sigma=0.1)
    law = Dislocation(kernel=kernel, drift=0.1)
    chi = _frozen(grid, u0)
    c = VelocityProvider(law, grid).prepare(0.0, chi)
    for curvature in (False, True):
        config = StepperConfig(curvature_enabled=curvature)
        dt = max_step(c.max_abs(), grid, config)
        for _ in range(20):
            a = u0.values + rng.integers(-64, 64, size=grid.shape) / 128.0
            b = a + rng.integers(0, 64, size=grid.shape) / 128.0
            ua = step(u0.with_values(a), c, config, dt)
            ub = step(u0.with_values(b), c, config, dt)
            assert np.all(ua.values <= ub.values + 1e-12)


@pytest.mark.parametrize('curvature', [False, True])
@pytest.mark.parametrize('axis', [0, 1])
def test_step_commutes_with_translation(curvature, axis):
    grid = build_grid(2, 1.0, 41, 1.0, 0.1)
    u = ScalarField(grid, np.maximum(0.3 - grid.radius, 0.0))
    c = ScalarField.constant(grid, 1.0)
    config = StepperConfig(curvature_enabled=curvature)
    dt = max_step(1.0, grid, config)

    shifted_first = step(u.with_values(np.roll(u.values, 1, axis=axis)), c, config, dt)
    stepped_first = np.roll(step(u, c, config, dt).values, 1, axis=axis)
    np.testing.assert_allclose(shifted_first.values, stepped_first, rtol=0, atol=1e-12)


def test_constant_speed_ball_growth():
    grid = build_grid(2, 1.0, 201, 0.4, 0.02)
    u0 = _ball(grid, 0.3)
    u = solve_frozen(VelocityProvider(Constant(1.0), grid), _frozen(grid, u0), u0)
    assert u.complete and not u.boundary_contact
    np.testing.assert_allclose(_radii(u), 0.3 + u.times, atol=2 * grid.spacing)
    assert np.max(np.abs(u.stack())) <= u0.max_abs() + 1e-10
    assert list(u.steps.columns) == ['t', 'dt', 'c_max', 'volume', 'min_u', 'max_u', 'effective_radius']
    assert u.steps['t'].iloc[-1] == pytest.approx(0.4)


@pytest.mark.slow
def test_curvature_shrinks_disc():
    grid = build_grid(2, 1.0, 101, 0.05, 0.005)
    u0 = _ball(grid, 0.4)
    config = StepperConfig(curvature_enabled=True, cfl_safety=1.0)
    u = solve_frozen(VelocityProvider(CurvatureOnly(), grid), _frozen(grid, u0), u0, config=config)
    expected = np.sqrt(0.4 ** 2 - 2.0 * u.times)
    np.testing.assert_allclose(_radii(u), expected, atol=5 * grid.spacing)
    assert _radii(u)[-1] < 0.4 - grid.spacing


def test_curvature_law_switches_curvature_on():
    grid = build_grid(2, 1.0, 41, 0.01, 0.005)
    u0 = _ball(grid, 0.4)
    u = solve_frozen(VelocityProvider(CurvatureOnly(), grid), _frozen(grid, u0), u0)
    assert np.any(u.final.values != u0.values)


def test_zero_speed_keeps_u0():
    grid = build_grid(2, 1.0, 41, 0.3, 0.1)
    u0 = _ball(grid, 0.3)
    u = solve_frozen(VelocityProvider(Constant(0.0), grid), _frozen(grid, u0), u0)
    np.testing.assert_array_equal(u.final.values, u0.values)


def test_boundary_contact_halts_run():
    grid = build_grid(2, 1.0, 41, 1.0, 0.05)
    u0 = _ball(grid, 0.5)
    u = solve_frozen(VelocityProvider(Constant(1.0), grid), _frozen(grid, u0), u0, halt_on_boundary=True)
    assert u.boundary_contact
    assert not u.complete
    assert 0.4 <= u.contact_time <= 0.55
    assert u.times[-1] == u.contact_time

    full = solve_frozen(VelocityProvider(Constant(1.0), grid), _frozen(grid, u0), u0)
    assert full.complete and full.boundary_contact


def test_level_set_relabeling_invariance():
    grid = build_grid(2, 1.0, 101, 0.2, 0.02)
    u0 = _ball(grid, 0.3)
    law = Dislocation(kernel=gaussian_kernel(grid, sigma=0.1), drift=0.2)
    chi = _frozen(grid, u0)
    plain = solve_frozen(VelocityProvider(law, grid), chi, u0)
    relabeled = solve_frozen(VelocityProvider(law, grid), chi, u0.with_values(u0.values + u0.values ** 3))

    final = plain.final
    difference = np.abs(indicator(final).values - indicator(relabeled.final).values)
    collar = final.with_values((np.abs(final.values) <= 2 * grid.spacing).astype(float))
    assert volume(final.with_values(difference)) <= volume(collar)


def test_redistance_keeps_distance():
    grid = build_grid(2, 1.0, 41, 1.0, 0.1)
    u0 = _ball(grid, 0.4)
    result = redistance(u0)
    assert not result.single_signed
    np.testing.assert_allclose(result.field.values, u0.values, atol=grid.spacing)

    scaled = redistance(u0.with_values(3.0 * u0.values))
    np.testing.assert_allclose(scaled.field.values, u0.values, atol=grid.spacing)
    np.testing.assert_array_equal(scaled.field.values >= 0, u0.values >= 0)


def test_redistance_single_signed():
    grid = build_grid(2, 1.0, 11, 1.0, 0.1)
    result = redistance(ScalarField.constant(grid, -1.0))
    assert result.single_signed
    assert np.all(result.field.values < 0)


def test_periodic_redistancing_during_run():
    grid = build_grid(2, 1.0, 41, 0.2, 0.05)
    u0 = _ball(grid, 0.3)
    config = StepperConfig(redistance_every=5)
    u = solve_frozen(VelocityProvider(Constant(1.0), grid), _frozen(grid, u0), u0, config=config)
    np.testing.assert_allclose(_radii(u)[-1], 0.5, atol=2 * grid.spacing)
