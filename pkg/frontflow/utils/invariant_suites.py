"""Self-checking invariant suites behind the check_invariants command."""
import logging
import math

import numpy as np
import pandas as pd
from scipy import special

from frontflow.solvers.barriers import COMPARISON_TOLERANCE, comparison_harness, random_ordered_pairs
from frontflow.solvers.fixedpoint import certify, xi_select
from frontflow.solvers.grid import (
    FieldSeries,
    OccupancyHistory,
    ScalarField,
    ShapeSpec,
    build_grid,
    signed_distance_init,
)
from frontflow.solvers.heat import BOUND_TOLERANCE, green_mass, lemma_bounds_check, solve_heat
from frontflow.solvers.levelset import solve_frozen
from frontflow.solvers.velocity import (
    Constant,
    CurvatureOnly,
    Dislocation,
    ScalarFunction,
    VelocityProvider,
    mexican_hat_kernel,
)

logger = logging.getLogger(__name__)

SUITES = ('comparison', 'heat', 'green', 'certificate')
RESULT_COLUMNS = ['suite', 'check', 'value', 'threshold', 'passed']
GREEN_TOLERANCE = 1e-3


class InvariantSuites:
    """Runs the named suites and collects one result row per assertion."""

    def __init__(self, seed=42, pair_count=100):
        self.seed = seed
        self.pair_count = pair_count
        self.rows = []

    def run(self, name: str) -> pd.DataFrame:
        names = SUITES if name == 'all' else (name,)
        for suite in names:
            logger.info("Running %s suite", suite)
            getattr(self, f'check_{suite}')()
        return pd.DataFrame(self.rows, columns=RESULT_COLUMNS)

    def _record(self, suite, check, value, threshold, passed):
        self.rows.append({
            'suite': suite,
            'check': check,
            'value': float(value),
            'threshold': float(threshold),
            'passed': bool(passed),
        })
        if not passed:
            logger.error("%s/%s failed: %.4g against %.4g", suite, check, value, threshold)

    def _rng(self, offset=0):
        return np.random.default_rng(self.seed + offset)

    def check_comparison(self):
        grid = build_grid(2, 1.0, 21, 0.05, 0.025)
        u0 = signed_distance_init(grid, ShapeSpec.ball((0.0, 0.0), 0.4))
        rng = self._rng()
        chi = OccupancyHistory.constant(grid, ScalarField(grid, rng.random(grid.shape)))
        laws = {
            'constant': Constant(1.0),
            'dislocation': Dislocation(kernel=mexican_hat_kernel(grid, sigma=0.1), drift=0.2),
            'curvature': CurvatureOnly(),
        }
        for name, law in laws.items():
            pairs = random_ordered_pairs(u0, self.pair_count, rng)
            report = comparison_harness(law, chi, pairs, grid)
            self._record('comparison', f'{name}_max_violation', report.max_violation, COMPARISON_TOLERANCE,
                         report.passed)

    def check_heat(self, runs=3):
        grid = build_grid(2, 1.0, 41, 0.1, 0.01)
        gamma = 1.5
        g_plus = ScalarFunction.custom(lambda r: 1.0 - 0.5 * np.tanh(r))
        g_minus = ScalarFunction.custom(lambda r: -0.5 - 0.5 * np.tanh(r))
        g_minus_low = ScalarFunction.custom(lambda r: -1.0 - 0.5 * np.tanh(r))
        for run in range(runs):
            rng = self._rng(run + 1)
            v0 = ScalarField(grid, 0.5 * np.exp(-4.0 * grid.radius ** 2) * rng.uniform(-1.0, 1.0))
            chi = OccupancyHistory.from_arrays(grid, grid.time_stamps,
                                               rng.random((len(grid.time_stamps),) + grid.shape))
            v = solve_heat(v0, chi, g_plus, g_minus, gamma)
            report = lemma_bounds_check(v, v0, gamma)
            self._record('heat', f'run{run}_bound_slack', report.max_bound_slack, BOUND_TOLERANCE,
                         report.bound_holds)
            self._record('heat', f'run{run}_k_fit_finite', report.k_fit, math.inf, math.isfinite(report.k_fit))

            lower = solve_heat(v0, chi, g_plus, g_minus_low, gamma)
            breach = float(np.max(lower.stack() - v.stack()))
            self._record('heat', f'run{run}_source_comparison', breach, BOUND_TOLERANCE, breach <= BOUND_TOLERANCE)

    def check_green(self):
        grid = build_grid(2, 1.0, 201, 1.0, 1.0)
        for s in (0.01, 0.05):
            mass = green_mass(grid, s)
            box_mass = special.erf(grid.half_extent / math.sqrt(4.0 * s)) ** grid.dim
            self._record('green', f'mass_s{s:g}', abs(mass - box_mass), GREEN_TOLERANCE,
                         abs(mass - box_mass) <= GREEN_TOLERANCE)
            logger.info("Green mass at s=%g: %.6f (box mass %.6f)", s, mass, box_mass)

    def check_certificate(self):
        grid = build_grid(2, 1.0, 51, 0.2, 0.05)
        rng = self._rng(10)
        u = FieldSeries.from_arrays(grid, grid.time_stamps, rng.normal(size=(len(grid.time_stamps),) + grid.shape))
        selected = certify(u, xi_select(u))
        self._record('certificate', 'maximal_selection_violation', selected.sandwich_violation_fraction, 0.0,
                     selected.sandwich_violation_fraction == 0.0)

        ones = FieldSeries.from_arrays(grid, grid.time_stamps, np.ones((len(grid.time_stamps),) + grid.shape))
        empty = OccupancyHistory.from_arrays(grid, grid.time_stamps, np.zeros((len(grid.time_stamps),) + grid.shape))
        worst = certify(ones, empty).sandwich_violation_fraction
        self._record('certificate', 'empty_occupancy_violation', worst, 1.0, math.isclose(worst, 1.0))

        u0 = signed_distance_init(grid, ShapeSpec.ball((0.0, 0.0), 0.3))
        chi = OccupancyHistory.constant(grid, ScalarField.constant(grid, 1.0))
        run = solve_frozen(VelocityProvider(Constant(1.0), grid), chi, u0, grid)
        cert = certify(run, xi_select(run))
        band = 2.0 * grid.spacing
        weights = run.time_weights()
        mean_radius = float(np.dot(0.3 + run.times, weights) / weights.sum())
        collar = 2.0 * band * 2.0 * math.pi * mean_radius
        ratio = cert.classical_gap / collar
        self._record('certificate', 'collar_gap_ratio', ratio, 2.0, 0.5 <= ratio <= 2.0)
