"""Heat equation with occupancy-switched sources.

The production path is an explicit finite-difference stepper with mirror boundaries.
The Green-function Duhamel quadrature is kept as an independent cross-check.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from scipy import ndimage

from .exceptions import CFLViolation, HeatError
from .grid import FieldSeries, GridSpec, OccupancyHistory, ScalarField, discrete_lipschitz

logger = logging.getLogger(__name__)

DEFAULT_HEAT_SAFETY = 0.5
BOUND_TOLERANCE = 1e-10


@dataclass(frozen=True)
class HeatState:
    v: ScalarField
    t: float
    gamma: float = 0.0

    def bound(self, v0_max: float) -> float:
        """Maximum-principle bound on |v| at this time."""
        return v0_max + self.gamma * self.t


def apply_source(fn: Callable, values: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(values), dtype=float), values.shape)


def source_term(v: np.ndarray, chi: np.ndarray, g_plus: Callable, g_minus: Callable) -> np.ndarray:
    """g+(v) chi + g-(v) (1 - chi)"""
    return apply_source(g_plus, v) * chi + apply_source(g_minus, v) * (1.0 - chi)


def green_eval(y, s: float, dim: int):
    """Heat kernel (4 pi s)^(-N/2) exp(-|y|^2 / 4s).

    `y` is a point with `dim` coordinates, or coordinates stacked along the first axis.
    """
    if not s > 0:
        raise HeatError(f"Green function needs s > 0, got {s}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape[0] != dim:
        raise HeatError(f"Point has {y.shape[0]} coordinates, expected {dim}")
    r2 = np.sum(y ** 2, axis=0)
    value = (4.0 * math.pi * s) ** (-dim / 2.0) * np.exp(-r2 / (4.0 * s))
    return float(value) if np.ndim(value) == 0 else value


def green_mass(grid: GridSpec, s: float, center=None) -> float:
    """Trapezoidal quadrature of G(x - y, s) over the box."""
    center = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    offsets = grid.coordinates - center.reshape((grid.dim,) + (1,) * grid.dim)
    return float(np.sum(green_eval(offsets, s, grid.dim) * grid.quadrature_weights))


def laplacian(values: np.ndarray, spacing: float) -> np.ndarray:
    """(2N+1)-point Laplacian with mirror (zero-Neumann) boundaries."""
    padded = np.pad(values, 1, mode='reflect')
    center = tuple(slice(1, -1) for _ in range(values.ndim))
    lap = -2.0 * values.ndim * values
    for axis in range(values.ndim):
        lo = list(center)
        hi = list(center)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        lap = lap + padded[tuple(lo)] + padded[tuple(hi)]
    return lap / spacing ** 2


def stable_dt(grid: GridSpec) -> float:
    return grid.spacing ** 2 / (2.0 * grid.dim)


def heat_step_fd(state: HeatState, chi: ScalarField, g_plus: Callable, g_minus: Callable, dt: float) -> HeatState:
    grid = state.v.grid
    limit = stable_dt(grid)
    if not 0 < dt <= limit * (1.0 + 1e-12):
        raise CFLViolation(f"Heat step dt={dt:.3e} outside (0, {limit:.3e}]")
    v = state.v.values
    update = v + dt * (laplacian(v, grid.spacing) + source_term(v, chi.values, g_plus, g_minus))
    return HeatState(state.v.with_values(update), state.t + dt, state.gamma)


def advance(state: HeatState, chi: ScalarField, g_plus, g_minus, t_next: float,
            safety: float = DEFAULT_HEAT_SAFETY) -> HeatState:
    """Take equal explicit steps from state.t to t_next with chi frozen."""
    span = t_next - state.t
    if span < -1e-12:
        raise HeatError(f"Cannot advance heat state backwards from t={state.t} to t={t_next}")
    if span <= 1e-15:
        return state
    n_steps = max(1, math.ceil(span / (safety * stable_dt(state.v.grid))))
    dt = span / n_steps
    for _ in range(n_steps):
        state = heat_step_fd(state, chi, g_plus, g_minus, dt)
    return HeatState(state.v, t_next, state.gamma)


def solve_heat(v0: ScalarField, chi_history: OccupancyHistory, g_plus, g_minus, gamma: float = 0.0,
               safety: float = DEFAULT_HEAT_SAFETY) -> FieldSeries:
    """Run the FD stepper across the stamps of `chi_history` and return v at each stamp."""
    state = HeatState(v0, 0.0, gamma)
    fields = [v0]
    times = chi_history.times
    for k in range(1, len(times)):
        state = advance(state, chi_history.fields[k - 1], g_plus, g_minus, times[k], safety)
        fields.append(state.v)
    return FieldSeries(v0.grid, times, tuple(fields), complete=chi_history.complete)


def duhamel_eval(v0: ScalarField, chi_history: OccupancyHistory, v_history: FieldSeries,
                 g_plus, g_minus, x, t: float, quad_dt: float) -> float:
    """Evaluate the Duhamel representation of v at (x, t) by quadrature.

    Args:
        v0: initial datum
        chi_history: occupancy used by the sources
        v_history: the computed v feeding g+(v) and g-(v) inside the integrand
        x: evaluation point
        t: evaluation time
        quad_dt: nominal width of the time slabs

    Returns:
        The quadrature value. The slab touching s = t is integrated as q * f(x, t),
        the exact answer for a source that is locally constant in space.
    """
    if not t > 0:
        raise HeatError(f"Duhamel evaluation needs t > 0, got {t}")
    grid = v0.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    offsets = x.reshape((grid.dim,) + (1,) * grid.dim) - grid.coordinates
    weights = grid.quadrature_weights

    value = float(np.sum(green_eval(offsets, t, grid.dim) * v0.values * weights))

    n_slabs = max(1, math.ceil(t / quad_dt - 1e-9))
    q = t / n_slabs
    for j in range(n_slabs - 1):
        s = (j + 0.5) * q
        f = source_term(v_history.at(s).values, chi_history.at(s).values, g_plus, g_minus)
        value += q * float(np.sum(green_eval(offsets, t - s, grid.dim) * f * weights))

    f_now = source_term(v_history.at(t).values, chi_history.at(t).values, g_plus, g_minus)
    node = (x + grid.half_extent) / grid.spacing
    f_x = ndimage.map_coordinates(f_now, node.reshape(grid.dim, 1), order=1, mode='nearest')[0]
    return value + q * float(f_x)


@dataclass
class HeatBoundsReport:
    """Outcome of the maximum-principle and modulus checks on a v history."""

    bound_holds: bool
    max_bound_slack: float
    k_fit_space: float
    k_fit_time: float
    frame: pd.DataFrame = field(repr=False)
    space_holds: bool | None = None
    time_holds: bool | None = None

    @property
    def k_fit(self) -> float:
        return max(self.k_fit_space, self.k_fit_time)


def _k_for_time_modulus(dv: float, grad0: float, gamma: float, s: float, t: float) -> float:
    """Smallest k >= 0 with dv <= k (grad0 + gamma k sqrt(s)) sqrt(t-s) + gamma (t-s)."""
    excess = dv - gamma * (t - s) - BOUND_TOLERANCE
    if excess <= 0:
        return 0.0
    a = grad0 * math.sqrt(t - s)
    b = gamma * math.sqrt(s) * math.sqrt(t - s)
    if b > 0:
        return (-a + math.sqrt(a * a + 4.0 * b * excess)) / (2.0 * b)
    return excess / a if a > 0 else math.inf


def _k_for_space_modulus(lip_t: float, lip0: float, gamma: float, t: float) -> float:
    excess = lip_t - lip0 - BOUND_TOLERANCE
    if excess <= 0:
        return 0.0
    return excess / (gamma * math.sqrt(t)) if gamma > 0 and t > 0 else math.inf


def lemma_bounds_check(v_history: FieldSeries, v0: ScalarField, gamma: float,
                       k_fit: float | None = None) -> HeatBoundsReport:
    """Check |v| <= |v0|_inf + gamma t and fit the constants of the space and time moduli."""
    h = v0.grid.spacing
    v0_max = v0.max_abs()
    lip0 = discrete_lipschitz(v0.values, h)
    times = v_history.times
    stacked = v_history.stack()

    rows = []
    k_space = k_time = 0.0
    for n, t in enumerate(times):
        values = stacked[n]
        max_abs = float(np.max(np.abs(values)))
        slack = max_abs - v0_max - gamma * t
        if t > 0:
            k_space = max(k_space, _k_for_space_modulus(discrete_lipschitz(values, h), lip0, gamma, t))
        for m in range(n):
            dv = float(np.max(np.abs(values - stacked[m])))
            k_time = max(k_time, _k_for_time_modulus(dv, lip0, gamma, times[m], t))
        rows.append({
            't': float(t),
            'max_abs_v': max_abs,
            'bound_i_slack': slack,
            'k_fit_running': max(k_space, k_time),
        })

    frame = pd.DataFrame(rows, columns=['t', 'max_abs_v', 'bound_i_slack', 'k_fit_running'])
    max_slack = float(frame['bound_i_slack'].max())
    report = HeatBoundsReport(
        bound_holds=max_slack <= BOUND_TOLERANCE,
        max_bound_slack=max_slack,
        k_fit_space=k_space,
        k_fit_time=k_time,
        frame=frame,
    )
    if k_fit is not None:
        report.space_holds = k_space <= k_fit
        report.time_holds = k_time <= k_fit
    if not report.bound_holds:
        logger.error("Maximum-principle bound violated by %.3e", max_slack)
    return report
