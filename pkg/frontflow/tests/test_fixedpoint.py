import math

import numpy as np
import pytest

from frontflow.solvers.barriers import barrier_ode
from frontflow.solvers.exceptions import GridError
from frontflow.solvers.grid import (
    FieldSeries,
    OccupancyHistory,
    ScalarField,
    ShapeSpec,
    build_grid,
    effective_radius,
    indicator,
    signed_distance_init,
    volume,
)
from frontflow.solvers.fixedpoint import (
    ITERATION_COLUMNS,
    FixedPointConfig,
    certify,
    fattening_report,
    probe_fixed_points,
    relaxed_iterate,
    xi_select,
)
from frontflow.solvers.levelset import solve_frozen
from frontflow.solvers.velocity import (
    Constant,
    Dislocation,
    FitzhughNagumo,
    ScalarFunction,
    VelocityProvider,
    VolumeDependent,
    mexican_hat_kernel,
)


def _ball(grid, radius):
    return signed_distance_init(grid, ShapeSpec.ball((0.0,) * grid.dim, radius))


def _constant_ball_run(grid, radius=0.3):
    u0 = _ball(grid, radius)
    return solve_frozen(VelocityProvider(Constant(1.0), grid), OccupancyHistory.constant(grid, indicator(u0)), u0)


def _radii(series):
    return np.array([effective_radius(volume(f), series.grid.dim) for f in series.fields])


def test_fixed_point_config():
    grid = build_grid(2, 1.0, 11, 2.0, 0.5)
    assert FixedPointConfig().tolerance(grid) == pytest.approx(1e-3 * 4.0 * 2.0)
    assert FixedPointConfig(tol_l1=0.5).tolerance(grid) == 0.5
    with pytest.raises(GridError):
        FixedPointConfig(relaxation=0.0)
    with pytest.raises(GridError):
        FixedPointConfig(max_iterations=0)
    with pytest.raises(GridError):
        FixedPointConfig(selection='minimal')


def test_xi_select_is_sharp_indicator():
    grid = build_grid(1, 1.0, 3, 1.0, 1.0)
    u = FieldSeries.from_arrays(grid, [0.0, 1.0], [[-1.0, 0.0, 1.0], [1.0, -0.5, 0.0]])
    chi = xi_select(u)
    assert isinstance(chi, OccupancyHistory)
    np.testing.assert_array_equal(chi.stack(), [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])


def test_certify_maximal_selection_has_no_violations(rng):
    grid = build_grid(2, 1.0, 21, 0.5, 0.1)
    u = FieldSeries.from_arrays(grid, grid.time_stamps, rng.normal(size=(len(grid.time_stamps),) + grid.shape))
    certificate = certify(u, xi_select(u))
    assert certificate.sandwich_violation_fraction == 0.0
    assert certificate.residual_l1 == 0.0
    assert certificate.converged
    assert certificate.band == 2.0 * grid.spacing


def test_certify_full_violation():
    grid = build_grid(2, 1.0, 21, 0.5, 0.1)
    u = FieldSeries(grid, grid.time_stamps, tuple(ScalarField.constant(grid, 1.0) for _ in grid.time_stamps))
    empty = OccupancyHistory.constant(grid, ScalarField.constant(grid, 0.0))
    certificate = certify(u, empty)
    assert certificate.sandwich_violation_fraction == pytest.approx(1.0)
    assert not certificate.converged


def test_certify_classical_gap_is_collar_volume():
    grid = build_grid(2, 1.0, 101, 0.2, 0.05)
    u = _constant_ball_run(grid)
    certificate = certify(u, xi_select(u))
    weights = u.time_weights()
    collar = np.sum(weights * 4.0 * grid.spacing * 2.0 * math.pi * (0.3 + u.times)) / np.sum(weights)
    assert 0.5 * collar <= certificate.classical_gap <= 2.0 * collar


def test_certify_rejects_mismatched_histories():
    grid = build_grid(1, 1.0, 5, 1.0, 0.5)
    u = FieldSeries(grid, grid.time_stamps, tuple(ScalarField.constant(grid, 1.0) for _ in grid.time_stamps))
    other = OccupancyHistory.constant(grid, ScalarField.constant(grid, 1.0), times=[0.0, 0.25, 1.0])
    with pytest.raises(GridError):
        certify(u, other)


def test_occupancy_free_law_converges_at_once():
    grid = build_grid(2, 1.0, 41, 0.2, 0.05)
    result = relaxed_iterate(Constant(1.0), _ball(grid, 0.3))
    assert result.converged
    assert result.iterations == 1
    assert result.residuals == [0.0]
    assert result.certificate.residual_l1 == 0.0
    assert result.certificate.sandwich_violation_fraction == 0.0
    assert list(result.log.columns) == ITERATION_COLUMNS
    assert result.v_history is None


@pytest.mark.slow
def test_volume_law_follows_radial_ode():
    grid = build_grid(2, 1.0, 101, 2.0, 0.05)
    beta = ScalarFunction.affine(0.25, -1.0)
    result = relaxed_iterate(
        VolumeDependent(beta=beta),
        _ball(grid, 0.1),
        fp_config=FixedPointConfig(relaxation=0.5, max_iterations=50),
    )
    assert result.converged
    assert result.certificate.residual_l1 == result.residuals[-1] <= FixedPointConfig().tolerance(grid)
    assert result.certificate.sandwich_violation_fraction == 0.0

    ode = barrier_ode(beta, 0.1, 2.0, 1e-3, 2)
    radii = _radii(result.chi)
    checkpoints = np.linspace(0, len(result.chi.times) - 1, 10).astype(int)
    expected = ode.radius_at(result.chi.times[checkpoints])
    np.testing.assert_allclose(radii[checkpoints], expected, atol=3 * grid.spacing)
    assert radii[-1] == pytest.approx(math.sqrt(0.25 / math.pi), abs=3 * grid.spacing)


def test_sign_changing_kernel_reports_residuals():
    grid = build_grid(2, 1.0, 61, 0.1, 0.02)
    law = Dislocation(kernel=mexican_hat_kernel(grid, sigma=0.1), drift=0.5)
    result = relaxed_iterate(law, _ball(grid, 0.3), fp_config=FixedPointConfig(max_iterations=20))
    assert 1 <= result.iterations <= 20
    assert len(result.log) == result.iterations
    assert all(r >= 0 for r in result.residuals)
    if result.converged:
        assert result.certificate.sandwich_violation_fraction <= 0.01
    else:
        assert result.certificate.residual_l1 == result.residuals[-1]


def test_non_convergence_is_reported():
    grid = build_grid(2, 1.0, 41, 0.4, 0.1)
    beta = ScalarFunction.affine(1.0, -1.0)
    result = relaxed_iterate(
        VolumeDependent(beta=beta),
        _ball(grid, 0.2),
        fp_config=FixedPointConfig(max_iterations=1, tol_l1=0.0),
    )
    assert result.iterations == 1
    assert not result.converged
    assert not result.certificate.converged


def test_iterates_stay_in_unit_interval(rng):
    grid = build_grid(2, 1.0, 41, 0.2, 0.05)
    stamps = len(grid.time_stamps)
    start = OccupancyHistory.from_arrays(grid, grid.time_stamps, rng.random((stamps,) + grid.shape))
    result = relaxed_iterate(
        VolumeDependent(beta=ScalarFunction.affine(0.5, -0.1)),
        _ball(grid, 0.3),
        chi_init=start,
        fp_config=FixedPointConfig(relaxation=0.3, max_iterations=3),
    )
    assert result.log['update_l1'].iloc[0] > 0
    stack = result.chi.stack()
    assert stack.min() >= 0.0 and stack.max() <= 1.0


def test_probe_fixed_points_for_occupancy_free_law(settings):
    settings.FRONTFLOW_THREADS = 2
    grid = build_grid(2, 1.0, 31, 0.2, 0.05)
    inits = [
        OccupancyHistory.constant(grid, ScalarField.constant(grid, value))
        for value in (0.0, 1.0)
    ]
    results = probe_fixed_points(Constant(0.5), _ball(grid, 0.3), inits)
    assert len(results) == 2
    assert all(r.converged for r in results)
    np.testing.assert_array_equal(results[0].u.final.values, results[1].u.final.values)


def test_fattening_report_on_signed_distance():
    grid = build_grid(2, 1.0, 101, 0.5, 0.5)
    u0 = _ball(grid, 0.5)
    h = grid.spacing
    series = FieldSeries(grid, grid.time_stamps, (u0, u0))
    report = fattening_report(series, [h, 2 * h, 4 * h], eta=0.1, law=Constant(1.0))
    assert report.lower_bound_holds
    assert report.nonnegative_velocity
    for exponent in report.exponents().values():
        assert exponent == pytest.approx(1.0, abs=0.2)
    mu = report.frame[report.frame['eps'] == 4 * h]['mu'].iloc[0]
    assert mu == pytest.approx(2 * 4 * h * 2 * math.pi * 0.5, rel=0.2)


def test_fattening_report_empty_front():
    grid = build_grid(2, 1.0, 21, 0.5, 0.5)
    minus = ScalarField.constant(grid, -1.0)
    report = fattening_report(FieldSeries(grid, grid.time_stamps, (minus, minus)), [0.1, 0.2], eta=0.5)
    assert (report.frame['mu'] == 0.0).all()
    assert report.lower_bound_holds
    assert report.nonnegative_velocity is None


def test_fattening_report_flags_plateau():
    grid = build_grid(2, 1.0, 41, 0.5, 0.5)
    plateau = ScalarField(grid, np.minimum(0.3 - grid.radius, 0.0))
    report = fattening_report(FieldSeries(grid, grid.time_stamps, (plateau, plateau)), [0.05, 0.1], eta=0.1)
    assert not report.lower_bound_holds
    assert report.lower_bound_min == 0.0
    assert len(report.frame) == 4


def test_fattening_report_rejects_bad_arguments():
    grid = build_grid(1, 1.0, 5, 0.5, 0.5)
    minus = ScalarField.constant(grid, -1.0)
    series = FieldSeries(grid, grid.time_stamps, (minus, minus))
    with pytest.raises(GridError):
        fattening_report(series, [0.2, 0.1], eta=0.1)
    with pytest.raises(GridError):
        fattening_report(series, [0.1], eta=0.0)


def test_constant_ball_is_classical_consistent():
    grid = build_grid(2, 1.0, 101, 0.3, 0.05)
    u = _constant_ball_run(grid)
    h = grid.spacing
    report = fattening_report(u, [h, 2 * h, 4 * h], eta=0.1, law=Constant(1.0))
    assert report.lower_bound_holds
    assert report.classical_consistent


@pytest.mark.slow
def test_fitzhugh_nagumo_end_to_end():
    grid = build_grid(2, 1.0, 151, 0.3, 0.03)
    law = FitzhughNagumo(
        alpha=ScalarFunction.affine(0.0, 1.0),
        g_plus=ScalarFunction.constant(1.0),
        g_minus=ScalarFunction.constant(0.0),
        v0=ScalarField.constant(grid, 0.0),
        g_lower=0.0,
        g_upper=1.0,
    )
    result = relaxed_iterate(law, _ball(grid, 0.3), fp_config=FixedPointConfig(max_iterations=50))
    assert result.converged

    radii = _radii(result.chi)
    assert np.all(np.diff(radii) >= 0.0)
    assert result.certificate.classical_gap <= 3 * (2 * grid.spacing) * (2 * math.pi * radii[-1])

    assert result.v_history is not None
    assert result.v_history.stack().min() >= -1e-12
    assert len(result.v_history) == len(result.u)
