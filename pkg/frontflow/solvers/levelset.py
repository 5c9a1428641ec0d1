"""Monotone explicit stepping of u_t = c(x, t)|Du| (+ curvature) with occupancy frozen per step."""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import ndimage

from .exceptions import CFLViolation, GridError
from .grid import (
    BOUNDARY_MARGIN_NODES,
    FieldSeries,
    GridSpec,
    ScalarField,
    effective_radius,
    indicator,
    volume,
)
from .velocity import VelocityProvider

logger = logging.getLogger(__name__)

CURVATURE_SCHEMES = ('median', 'central')
MEDIAN_RADIUS_NODES = 3.0
MEDIAN_SAMPLES = 16
MIN_DT = 1e-14
VELOCITY_FLOOR = 1e-14
SWEEP_TOLERANCE = 1e-12
MAX_SWEEPS = 20


@dataclass(frozen=True)
class StepperConfig:
    curvature_enabled: bool = False
    grad_regularization: float | None = None
    cfl_safety: float = 0.5
    redistance_every: int = 0
    curvature_scheme: str = 'median'

    def __post_init__(self):
        if self.grad_regularization is not None and not self.grad_regularization > 0:
            raise GridError("grad_regularization must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise GridError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.redistance_every < 0:
            raise GridError("redistance_every must be nonnegative")
        if self.curvature_scheme not in CURVATURE_SCHEMES:
            raise GridError(f"Unknown curvature scheme '{self.curvature_scheme}'")

    def eps_g(self, grid: GridSpec) -> float:
        return grid.spacing if self.grad_regularization is None else self.grad_regularization

    def uses_median(self, dim: int) -> bool:
        return self.curvature_enabled and self.curvature_scheme == 'median' and dim == 2


@dataclass(frozen=True, eq=False)
class FieldHistory(FieldSeries):
    """History of u with run diagnostics attached."""

    boundary_contact: bool = False
    contact_time: float | None = None
    steps: pd.DataFrame | None = field(default=None, repr=False)


def _one_sided(values: np.ndarray, spacing: float):
    """Backward and forward differences along each axis, with zero slope past the box."""
    padded = np.pad(values, 1, mode='edge')
    center = tuple(slice(1, -1) for _ in range(values.ndim))
    for axis in range(values.ndim):
        lo, hi = list(center), list(center)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        yield (values - padded[tuple(lo)]) / spacing, (padded[tuple(hi)] - values) / spacing


def gradient_upwind(u: ScalarField, c_sign) -> ScalarField:
    """Upwind |Du| for u_t = c|Du|, selected per node by the sign of c."""
    expanding = np.zeros(u.grid.shape)
    shrinking = np.zeros(u.grid.shape)
    for backward, forward in _one_sided(u.values, u.grid.spacing):
        expanding += np.minimum(backward, 0.0) ** 2 + np.maximum(forward, 0.0) ** 2
        shrinking += np.maximum(backward, 0.0) ** 2 + np.minimum(forward, 0.0) ** 2
    positive = np.broadcast_to(np.asarray(c_sign) >= 0, u.grid.shape)
    return u.with_values(np.sqrt(np.where(positive, expanding, shrinking)))


def _interior(grid: GridSpec) -> np.ndarray:
    return ~grid.boundary_mask(1)


def curvature_term(u: ScalarField, eps_g: float) -> ScalarField:
    """Central-difference |Du|_eps div(Du / |Du|_eps) with |Du|_eps = sqrt(|Du|^2 + eps^2).

    Zero on the outer layer of nodes.
    """
    v, h, dim = u.values, u.grid.spacing, u.grid.dim
    first = [(np.roll(v, -1, axis=a) - np.roll(v, 1, axis=a)) / (2.0 * h) for a in range(dim)]
    norm2 = sum(d ** 2 for d in first) + eps_g ** 2

    laplace = np.zeros_like(v)
    quadratic = np.zeros_like(v)
    for a in range(dim):
        second = (np.roll(v, -1, axis=a) - 2.0 * v + np.roll(v, 1, axis=a)) / h ** 2
        laplace += second
        quadratic += first[a] ** 2 * second
        for b in range(a + 1, dim):
            mixed = (
                np.roll(np.roll(v, -1, axis=a), -1, axis=b)
                - np.roll(np.roll(v, -1, axis=a), 1, axis=b)
                - np.roll(np.roll(v, 1, axis=a), -1, axis=b)
                + np.roll(np.roll(v, 1, axis=a), 1, axis=b)
            ) / (4.0 * h ** 2)
            quadratic += 2.0 * first[a] * first[b] * mixed

    term = np.where(_interior(u.grid), laplace - quadratic / norm2, 0.0)
    return u.with_values(term)


def median_curvature(u: ScalarField, radius_nodes: float = MEDIAN_RADIUS_NODES,
                     samples: int = MEDIAN_SAMPLES) -> ScalarField:
    """Monotone 2D curvature rate (2/eps^2)(median of u on a circle of radius eps - u)."""
    if u.grid.dim != 2:
        raise GridError("The median curvature stencil is two-dimensional")
    eps = radius_nodes * u.grid.spacing
    index = np.indices(u.grid.shape, dtype=float)
    ring = []
    for theta in np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False):
        offset = np.array([math.cos(theta), math.sin(theta)]).reshape(2, 1, 1) * radius_nodes
        ring.append(ndimage.map_coordinates(u.values, index + offset, order=1, mode='nearest'))
    median = np.median(np.stack(ring), axis=0)
    return u.with_values(2.0 / eps ** 2 * (median - u.values))


def curvature_rate(u: ScalarField, config: StepperConfig) -> np.ndarray:
    dim = u.grid.dim
    if not config.curvature_enabled or dim == 1:
        return np.zeros(u.grid.shape)
    if config.uses_median(dim):
        return median_curvature(u).values
    return curvature_term(u, config.eps_g(u.grid)).values


def cfl_dt(c_max: float, h: float, curvature_enabled: bool, cfl_safety: float, dim: int) -> float:
    transport = h / (math.sqrt(dim) * max(c_max, VELOCITY_FLOOR))
    diffusion = h ** 2 / (4.0 * dim) if curvature_enabled else math.inf
    return cfl_safety * min(transport, diffusion)


def monotone_dt(c_max: float, h: float, dim: int, config: StepperConfig) -> float:
    """Largest dt keeping every node's update a nondecreasing function of its neighbours."""
    rate = c_max * math.sqrt(2.0 * dim) / h
    if config.uses_median(dim):
        rate += 2.0 / (MEDIAN_RADIUS_NODES * h) ** 2
    return math.inf if rate == 0 else 1.0 / rate


def max_step(c_max: float, grid: GridSpec, config: StepperConfig, safety: float | None = None) -> float:
    safety = config.cfl_safety if safety is None else safety
    return min(
        cfl_dt(c_max, grid.spacing, config.curvature_enabled, safety, grid.dim),
        monotone_dt(c_max, grid.spacing, grid.dim, config),
    )


def step(u: ScalarField, c: ScalarField, config: StepperConfig, dt: float) -> ScalarField:
    """One explicit Euler step; the outer layer of nodes is left unchanged."""
    grid = u.grid
    c_values = np.broadcast_to(c.values, grid.shape)
    limit = max_step(float(np.max(np.abs(c_values))), grid, config, safety=1.0)
    if not 0 < dt <= limit * (1.0 + 1e-12):
        raise CFLViolation(f"Step dt={dt:.3e} outside (0, {limit:.3e}]")

    rate = c_values * gradient_upwind(u, c_values).values + curvature_rate(u, config)
    updated = np.where(grid.boundary_mask(1), u.values, u.values + dt * rate)
    return u.with_values(updated)


def front_touches_boundary(u: ScalarField) -> bool:
    return bool(np.any(u.values[u.grid.boundary_mask(BOUNDARY_MARGIN_NODES)] >= 0))


def solve_frozen(provider: VelocityProvider, chi_history: FieldSeries, u0: ScalarField,
                 grid: GridSpec | None = None, config: StepperConfig | None = None,
                 halt_on_boundary: bool = False) -> FieldHistory:
    """Advance u0 over the grid's time stamps with the occupancy history held fixed.

    Args:
        provider: velocity source; prepared at the start of every substep
        chi_history: occupancy sampled at the stamp in force
        u0: initial level-set function
        grid: grid carrying the time stamps (defaults to u0's grid)
        config: stepper settings
        halt_on_boundary: stop at the first stamp where the front enters the boundary margin

    Returns:
        FieldHistory with u at every reached stamp and a per-substep log
    """
    grid = u0.grid if grid is None else grid
    config = StepperConfig() if config is None else config
    if provider.law.curvature and not config.curvature_enabled:
        config = replace(config, curvature_enabled=True)
    if not chi_history.grid.compatible(grid):
        raise GridError("Occupancy history lives on a different grid")
    if chi_history.times[-1] < grid.t_final - 1e-9:
        raise GridError("Occupancy history does not span the run")

    times = grid.time_stamps
    u = u0
    t = 0.0
    fields = [u0]
    rows = []
    substeps = 0
    contact_time = None
    u0_max = u0.max_abs()

    for k in range(1, len(times)):
        while t < times[k] - 1e-12:
            c = provider.prepare(t, chi_history)
            c_max = c.max_abs()
            dt = min(max_step(c_max, grid, config), times[k] - t)
            if dt < MIN_DT:
                raise CFLViolation(f"Time step collapsed to {dt:.3e} at t={t:.6g}")
            u = step(u, c, config, dt)
            t = times[k] if times[k] - (t + dt) < 1e-12 else t + dt
            substeps += 1
            if config.redistance_every and substeps % config.redistance_every == 0:
                u = redistance(u).field
            vol = volume(indicator(u))
            rows.append({
                't': t,
                'dt': dt,
                'c_max': c_max,
                'volume': vol,
                'min_u': float(u.values.min()),
                'max_u': float(u.values.max()),
                'effective_radius': effective_radius(vol, grid.dim),
            })
        fields.append(u)

        if contact_time is None and front_touches_boundary(u):
            contact_time = float(times[k])
            logger.warning("Front entered the boundary margin at t=%.4g", contact_time)
            if halt_on_boundary:
                break

    if provider.tracks_state:
        provider.prepare(float(times[len(fields) - 1]), chi_history)

    if not config.curvature_enabled and u.max_abs() > u0_max + 1e-10 and not config.redistance_every:
        logger.warning("Max norm grew from %.6g to %.6g during a geometric run", u0_max, u.max_abs())

    steps = pd.DataFrame(rows, columns=['t', 'dt', 'c_max', 'volume', 'min_u', 'max_u', 'effective_radius'])
    logger.debug("Solved frozen problem: %d substeps over %d stamps", substeps, len(fields))
    return FieldHistory(
        grid,
        times[:len(fields)],
        tuple(fields),
        complete=len(fields) == len(times),
        boundary_contact=contact_time is not None,
        contact_time=contact_time,
        steps=steps,
    )


# Redistancing ---------------------------------------------------------------

class RedistanceResult(NamedTuple):
    field: ScalarField
    single_signed: bool


def _interface_distances(values: np.ndarray, spacing: float) -> np.ndarray:
    """Distance to the linearly interpolated zero contour at nodes next to a sign change, inf elsewhere."""
    inside = values >= 0
    inv_sq = np.zeros(values.shape)
    crossing = np.zeros(values.shape, dtype=bool)
    for axis in range(values.ndim):
        nearest = np.full(values.shape, np.inf)
        for shift in (1, -1):
            neighbour = np.roll(values, shift, axis=axis)
            valid = np.ones(values.shape, dtype=bool)
            edge = [slice(None)] * values.ndim
            edge[axis] = 0 if shift == 1 else -1
            valid[tuple(edge)] = False
            change = valid & (inside != (neighbour >= 0))
            with np.errstate(divide='ignore', invalid='ignore'):
                theta = np.where(change, values / (values - neighbour), np.inf)
            nearest = np.minimum(nearest, np.abs(theta) * spacing)
        hit = np.isfinite(nearest)
        crossing |= hit
        with np.errstate(divide='ignore'):
            inv_sq += np.where(hit, 1.0 / np.maximum(nearest, 1e-300) ** 2, 0.0)
    distance = np.full(values.shape, np.inf)
    distance[crossing] = 1.0 / np.sqrt(inv_sq[crossing])
    distance[values == 0] = 0.0
    return distance


def _godunov(neighbours: list[float], h: float) -> float:
    a = sorted(neighbours)
    candidate = a[0] + h
    for n in range(2, len(a) + 1):
        if candidate <= a[n - 1]:
            break
        s, s2 = sum(a[:n]), sum(x * x for x in a[:n])
        disc = s * s - n * (s2 - h * h)
        candidate = (s + math.sqrt(max(disc, 0.0))) / n
    return candidate


def _sweep(distance: np.ndarray, fixed: np.ndarray, h: float) -> float:
    shape = distance.shape
    change = 0.0
    for directions in itertools.product((1, -1), repeat=distance.ndim):
        orders = [range(m) if d > 0 else range(m - 1, -1, -1) for m, d in zip(shape, directions)]
        for node in itertools.product(*orders):
            if fixed[node]:
                continue
            neighbours = []
            for axis in range(distance.ndim):
                i = node[axis]
                lo = distance[node[:axis] + (i - 1,) + node[axis + 1:]] if i > 0 else math.inf
                hi = distance[node[:axis] + (i + 1,) + node[axis + 1:]] if i < shape[axis] - 1 else math.inf
                neighbours.append(min(lo, hi))
            if math.isinf(min(neighbours)):
                continue
            candidate = _godunov([n for n in neighbours if math.isfinite(n)], h)
            if candidate < distance[node]:
                change = max(change, distance[node] - candidate if math.isfinite(distance[node]) else math.inf)
                distance[node] = candidate
    return change


def redistance(u: ScalarField) -> RedistanceResult:
    """Signed distance to the zero contour of u by fast sweeping; node signs are preserved."""
    grid = u.grid
    inside = u.values >= 0
    sign = np.where(inside, 1.0, -1.0)
    if inside.all() or not inside.any():
        diameter = 2.0 * grid.half_extent * math.sqrt(grid.dim)
        logger.debug("Redistance of a single-signed field")
        return RedistanceResult(u.with_values(sign * diameter), True)

    distance = _interface_distances(u.values, grid.spacing)
    fixed = np.isfinite(distance)
    for sweep in range(MAX_SWEEPS):
        if _sweep(distance, fixed, grid.spacing) <= SWEEP_TOLERANCE:
            break
    else:
        logger.warning("Fast sweeping stopped after %d sweeps without settling", MAX_SWEEPS)
    return RedistanceResult(u.with_values(sign * distance), False)
