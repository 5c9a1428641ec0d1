"""Relaxed fixed-point iteration on occupancy histories and weak-solution certificates."""
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from .exceptions import GridError
from .grid import (
    FieldSeries,
    GridSpec,
    OccupancyHistory,
    ScalarField,
    effective_radius,
    indicator,
    l1_distance,
    setting,
    volume,
)
from .levelset import FieldHistory, StepperConfig, gradient_upwind, solve_frozen
from .velocity import VelocityLaw, VelocityProvider, nonnegative_velocity

logger = logging.getLogger(__name__)

SELECTIONS = ('sharp',)
ITERATION_COLUMNS = ['k', 'residual_l1', 'update_l1', 'volume_T', 'effective_radius_T', 'wall_time']


@dataclass(frozen=True)
class FixedPointConfig:
    relaxation: float = 0.5
    max_iterations: int = 50
    tol_l1: float | None = None
    selection: str = 'sharp'

    def __post_init__(self):
        if not 0 < self.relaxation <= 1:
            raise GridError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.max_iterations < 1:
            raise GridError("max_iterations must be at least 1")
        if self.tol_l1 is not None and self.tol_l1 < 0:
            raise GridError("tol_l1 must be nonnegative")
        if self.selection not in SELECTIONS:
            raise GridError(f"Unknown selection '{self.selection}'")

    def tolerance(self, grid: GridSpec) -> float:
        if self.tol_l1 is not None:
            return self.tol_l1
        return 1e-3 * grid.box_volume * grid.t_final


@dataclass(frozen=True)
class WeakSolutionCertificate:
    sandwich_violation_fraction: float
    classical_gap: float
    residual_l1: float
    converged: bool
    band: float

    def as_dict(self) -> dict:
        return asdict(self)


def xi_select(u: FieldSeries) -> OccupancyHistory:
    """Maximal selection: the sharp indicator of {u >= 0} at every stamp."""
    return OccupancyHistory(u.grid, u.times, tuple(indicator(f) for f in u.fields), complete=u.complete)


def _space_time_weights(series: FieldSeries) -> tuple[np.ndarray, float]:
    weights = series.time_weights() * series.grid.cell_volume
    total = float(np.sum(weights)) * series.grid.node_count
    return weights, total


def certify(u: FieldSeries, chi: FieldSeries, band: float | None = None,
            tol_l1: float | None = None) -> WeakSolutionCertificate:
    """Measure how far (u, chi) is from a weak solution on the grid.

    Violations of the sandwich 1_{u>0} <= chi <= 1_{u>=0} only count where |u| > band.
    """
    if not u.same_stamps(chi):
        raise GridError("Certificate needs u and chi on the same grid and stamps")
    band = 2.0 * u.grid.spacing if band is None else band
    values = u.stack()
    occupancy = chi.stack()
    weights, total = _space_time_weights(u)

    violated = ((values > band) & (occupancy < 1.0 - 1e-12)) | ((values < -band) & (occupancy > 1e-12))
    per_step = violated.reshape(len(u), -1).sum(axis=1)
    fraction = float(np.dot(per_step, weights)) / total if total > 0 else 0.0

    collar = (np.abs(values) <= band).reshape(len(u), -1).sum(axis=1)
    duration = float(np.sum(u.time_weights()))
    gap = float(np.dot(collar, weights)) / duration if duration > 0 else 0.0

    residual = l1_distance(chi, xi_select(u))
    tol = FixedPointConfig().tolerance(u.grid) if tol_l1 is None else tol_l1
    return WeakSolutionCertificate(
        sandwich_violation_fraction=min(fraction, 1.0),
        classical_gap=gap,
        residual_l1=residual,
        converged=residual <= tol,
        band=band,
    )


@dataclass
class FixedPointResult:
    u: FieldHistory
    chi: OccupancyHistory
    certificate: WeakSolutionCertificate
    log: pd.DataFrame = field(repr=False)
    residuals: list = field(default_factory=list)
    v_history: FieldSeries | None = field(default=None, repr=False)
    radius_monotone: bool = True

    @property
    def converged(self) -> bool:
        return self.certificate.converged

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def _relax(previous: OccupancyHistory, target: OccupancyHistory, theta: float) -> OccupancyHistory:
    arrays = (1.0 - theta) * previous.stack() + theta * target.stack()
    return OccupancyHistory.from_arrays(previous.grid, previous.times, arrays)


def _radius_monotone(radii: list[float]) -> bool:
    """Effective radii at T move in one direction after the first iteration."""
    steps = np.diff(radii[1:])
    return bool(np.all(steps >= -1e-12) or np.all(steps <= 1e-12))


def relaxed_iterate(law: VelocityLaw, u0: ScalarField, chi_init: OccupancyHistory | None = None,
                    grid: GridSpec | None = None, stepper_config: StepperConfig | None = None,
                    fp_config: FixedPointConfig | None = None,
                    halt_on_boundary: bool = False) -> FixedPointResult:
    """Damped Picard iteration chi^k = (1 - theta) chi^(k-1) + theta xi_select(u[chi^(k-1)]).

    The residual of iterate k is the L1 distance between chi^k and xi_select(u[chi^k]).
    The returned `chi` and the certificate's sandwich measure use the maximal selection
    of the final u; the distance of the relaxed chi^k to it is the certificate's
    residual_l1. Non-convergence is reported through the certificate, never raised.
    """
    grid = u0.grid if grid is None else grid
    fp_config = FixedPointConfig() if fp_config is None else fp_config
    tol = fp_config.tolerance(grid)
    provider = VelocityProvider(law, grid)

    def solve(chi: OccupancyHistory) -> FieldHistory:
        provider.reset()
        return solve_frozen(provider, chi, u0, grid, stepper_config, halt_on_boundary=halt_on_boundary)

    def log_row(k, residual, update, u, started):
        vol = volume(indicator(u.final))
        return {
            'k': k,
            'residual_l1': residual,
            'update_l1': update,
            'volume_T': vol,
            'effective_radius_T': effective_radius(vol, grid.dim),
            'wall_time': time.perf_counter() - started,
        }

    chi = chi_init if chi_init is not None else OccupancyHistory.constant(grid, indicator(u0))
    rows, residuals = [], []
    started = time.perf_counter()
    u = solve(chi)

    if not law.depends_on_occupancy:
        selected = xi_select(u)
        update = l1_distance(selected, chi) if u.complete else math.nan
        residuals.append(0.0)
        rows.append(log_row(1, 0.0, update, u, started))
        converged = u.complete
    else:
        converged = False
        for k in range(1, fp_config.max_iterations + 1):
            if not u.complete:
                logger.warning("Iteration %d stopped: the front left the usable box", k)
                break
            started = time.perf_counter()
            relaxed = _relax(chi, xi_select(u), fp_config.relaxation)
            update = l1_distance(relaxed, chi)
            chi = relaxed
            u = solve(chi)
            if not u.complete:
                residual = math.nan
            else:
                residual = l1_distance(chi, xi_select(u))
            residuals.append(residual)
            rows.append(log_row(k, residual, update, u, started))
            logger.info("Fixed-point iteration %d: residual %.4e (update %.4e)", k, residual, update)
            if residual <= tol:
                converged = True
                break

    log = pd.DataFrame(rows, columns=ITERATION_COLUMNS)
    monotone = _radius_monotone(log['effective_radius_T'].tolist())
    if not monotone:
        logger.info("Effective radius at T did not move monotonically across iterations")

    selected = xi_select(u)
    if u.complete:
        certificate = certify(u, selected, tol_l1=tol)
    else:
        certificate = WeakSolutionCertificate(math.nan, math.nan, math.nan, False, 2.0 * grid.spacing)
    certificate = replace(certificate, residual_l1=residuals[-1] if residuals else math.nan, converged=converged)
    if not converged:
        logger.warning("Fixed point not reached after %d iterations (tolerance %.3e)", len(residuals), tol)

    return FixedPointResult(
        u=u,
        chi=selected,
        certificate=certificate,
        log=log,
        residuals=residuals,
        v_history=provider.v_history(u.times) if provider.tracks_state else None,
        radius_monotone=monotone,
    )


def probe_fixed_points(law: VelocityLaw, u0: ScalarField, chi_inits, grid: GridSpec | None = None,
                       stepper_config: StepperConfig | None = None,
                       fp_config: FixedPointConfig | None = None) -> list[FixedPointResult]:
    """Run relaxed iterations from several initial occupancies concurrently."""
    chi_inits = list(chi_inits)
    workers = max(1, min(len(chi_inits), setting('FRONTFLOW_THREADS', None) or os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(relaxed_iterate, law, u0, chi, grid, stepper_config, fp_config)
            for chi in chi_inits
        ]
        return [f.result() for f in futures]


@dataclass
class FatteningReport:
    lower_bound_holds: bool
    lower_bound_min: float
    classical_consistent: bool
    frame: pd.DataFrame = field(repr=False)
    nonnegative_velocity: bool | None = None

    def exponents(self) -> dict[float, float]:
        return self.frame.groupby('t')['exponent'].first().to_dict()


def _gradient_magnitude(u: ScalarField) -> np.ndarray:
    return np.maximum(gradient_upwind(u, 1.0).values, gradient_upwind(u, -1.0).values)


def _perimeter_estimate(u: ScalarField, band: float) -> float:
    """Coarea estimate of the zero set's size: integral of |Du| over {|u| <= band} divided by 2 band."""
    collar = np.abs(u.values) <= band
    return float(np.sum(_gradient_magnitude(u)[collar]) * u.grid.cell_volume) / (2.0 * band)


def fattening_report(u: FieldSeries, eps_list, eta: float, law: VelocityLaw | None = None) -> FatteningReport:
    """Collar volumes mu(eps, t) = |{|u| <= eps}| and the lower-bound check on u0.

    A run is flagged classical-consistent when every collar volume is at most
    3 * perimeter * eps.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or eps_list != sorted(eps_list):
        raise GridError("eps list must be positive and increasing")
    if not eta > 0:
        raise GridError("eta must be positive")
    grid = u.grid
    h = grid.spacing

    u0 = u.fields[0]
    lower = np.abs(u0.values) + _gradient_magnitude(u0)
    interior = ~grid.boundary_mask(1)
    lower_min = float(lower[interior].min())
    lower_holds = lower_min >= eta - h
    if not lower_holds:
        logger.warning("Initial datum violates |u0| + |Du0| >= %.3g (min %.3g)", eta, lower_min)

    rows = []
    consistent = True
    for t, f in u:
        perimeter = _perimeter_estimate(f, 2.0 * h)
        mus = [volume(f.with_values((np.abs(f.values) <= e).astype(float))) for e in eps_list]
        positive = [(e, m) for e, m in zip(eps_list, mus) if m > 0]
        exponent = float(np.polyfit(np.log([e for e, _ in positive]), np.log([m for _, m in positive]), 1)[0]) \
            if len(positive) >= 2 else math.nan
        for e, m in zip(eps_list, mus):
            bound = 3.0 * perimeter * e
            consistent &= m <= bound + 1e-12
            rows.append({'t': t, 'eps': e, 'mu': m, 'perimeter': perimeter, 'bound': bound, 'exponent': exponent})

    frame = pd.DataFrame(rows, columns=['t', 'eps', 'mu', 'perimeter', 'bound', 'exponent'])
    nonneg = nonnegative_velocity(law, grid, grid.t_final) if law is not None else None
    return FatteningReport(
        lower_bound_holds=lower_holds,
        lower_bound_min=lower_min,
        classical_consistent=bool(consistent),
        frame=frame,
        nonnegative_velocity=nonneg,
    )
