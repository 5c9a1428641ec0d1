"""Discrete geometry: grids, scalar fields, time-indexed histories and initial shapes."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, reduce
from typing import Callable, Iterator, Sequence

import numpy as np
from django.conf import settings

from .exceptions import GridError

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (1, 2, 3)
DEFAULT_MAX_NODES = 2 ** 24
UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
BOUNDARY_MARGIN_NODES = 2


def setting(name: str, default):
    """Read a FRONTFLOW_* setting, falling back to `default` outside a configured Django project."""
    if not settings.configured:
        return default
    return getattr(settings, name, default)


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on the box [-L, L]^N with a nominal output time step."""

    dim: int
    half_extent: float
    points_per_axis: int
    t_final: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise GridError(f"Unsupported dimension {self.dim}; expected one of {SUPPORTED_DIMS}")
        if not self.half_extent > 0:
            raise GridError(f"half_extent must be positive, got {self.half_extent}")
        if self.points_per_axis < 3:
            raise GridError(f"points_per_axis must be at least 3, got {self.points_per_axis}")
        if not (self.t_final > 0 and self.dt > 0):
            raise GridError("t_final and dt must be positive")
        budget = setting('FRONTFLOW_MAX_NODES', DEFAULT_MAX_NODES)
        if self.node_count > budget:
            raise GridError(
                f"Grid with {self.node_count} nodes exceeds the memory budget of {budget} nodes"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def node_count(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def box_volume(self) -> float:
        return (2.0 * self.half_extent) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        axis = np.linspace(-self.half_extent, self.half_extent, self.points_per_axis)
        axis.setflags(write=False)
        return axis

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates stacked along the first axis, shape (dim, M, ..., M)."""
        coords = np.stack(np.meshgrid(*([self.axis] * self.dim), indexing='ij'))
        coords.setflags(write=False)
        return coords

    @cached_property
    def radius(self) -> np.ndarray:
        radius = np.sqrt(np.sum(self.coordinates ** 2, axis=0))
        radius.setflags(write=False)
        return radius

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal node weights; they sum to the box volume."""
        w = np.full(self.points_per_axis, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        weights = reduce(np.multiply.outer, [w] * self.dim) if self.dim > 1 else w
        weights = np.asarray(weights, dtype=float)
        weights.setflags(write=False)
        return weights

    @cached_property
    def time_stamps(self) -> np.ndarray:
        n = max(1, math.ceil(self.t_final / self.dt - 1e-9))
        times = np.minimum(np.arange(n + 1) * self.dt, self.t_final)
        times[-1] = self.t_final
        times.setflags(write=False)
        return times

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        """True on nodes lying within `width` layers of a box face."""
        idx = np.arange(self.points_per_axis)
        near = (idx < width) | (idx >= self.points_per_axis - width)
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            view = [np.newaxis] * self.dim
            view[axis] = slice(None)
            mask |= near[tuple(view)]
        return mask

    def compatible(self, other: 'GridSpec') -> bool:
        return (
            self.dim == other.dim
            and self.points_per_axis == other.points_per_axis
            and math.isclose(self.half_extent, other.half_extent, rel_tol=1e-12)
        )

    @classmethod
    def patch(cls, dim: int, spacing: float, radius_nodes: int) -> 'GridSpec':
        """Centered patch with `2 * radius_nodes + 1` nodes per axis and the given spacing."""
        if radius_nodes < 1:
            raise GridError("A kernel patch needs at least one node on each side of its center")
        return cls(dim=dim, half_extent=radius_nodes * spacing, points_per_axis=2 * radius_nodes + 1)


def build_grid(dim, half_extent, points_per_axis, t_final, dt) -> GridSpec:
    grid = GridSpec(
        dim=int(dim),
        half_extent=float(half_extent),
        points_per_axis=int(points_per_axis),
        t_final=float(t_final),
        dt=float(dt),
    )
    logger.debug("Built %dD grid: M=%d, h=%.4g, T=%.4g", grid.dim, grid.points_per_axis, grid.spacing, grid.t_final)
    return grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-valued grid function; values are copied, reshaped to the grid and frozen."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.node_count:
            raise GridError(f"Field has {values.size} values, grid expects {self.grid.node_count}")
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise GridError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> 'ScalarField':
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> 'ScalarField':
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.coordinates), dtype=float), grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> 'ScalarField':
        return ScalarField(self.grid, values)


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """Fields stored at strictly increasing time stamps starting at 0.

    A complete series ends at the grid's final time; partial series come from halted runs.
    """

    grid: GridSpec
    times: np.ndarray
    fields: tuple
    complete: bool = True

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        fields = tuple(self.fields)
        if times.ndim != 1 or len(times) == 0 or len(times) != len(fields):
            raise GridError("A history needs one field per time stamp")
        if np.any(np.diff(times) <= 0):
            raise GridError("History time stamps must be strictly increasing")
        if abs(times[0]) > 1e-12:
            raise GridError(f"History must start at t=0, starts at {times[0]}")
        if self.complete and not math.isclose(times[-1], self.grid.t_final, rel_tol=1e-9, abs_tol=1e-12):
            raise GridError(f"History must end at T={self.grid.t_final}, ends at {times[-1]}")
        for f in fields:
            if not f.grid.compatible(self.grid):
                raise GridError("History field lives on a different grid")
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'fields', tuple(self._admit(f) for f in fields))

    def _admit(self, field: ScalarField) -> ScalarField:
        return field

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self) -> Iterator[tuple[float, ScalarField]]:
        return iter(zip(self.times.tolist(), self.fields))

    def index_at(self, t: float) -> int:
        """Index of the stamp in force at time t (latest stamp not after t)."""
        tol = 1e-9 * max(1.0, abs(self.times[-1]))
        idx = int(np.searchsorted(self.times, t + tol, side='right')) - 1
        return min(max(idx, 0), len(self.times) - 1)

    def at(self, t: float) -> ScalarField:
        return self.fields[self.index_at(t)]

    @property
    def final(self) -> ScalarField:
        return self.fields[-1]

    def stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    def time_weights(self) -> np.ndarray:
        """Duration each stamp is in force; the last stamp carries no weight."""
        return np.append(np.diff(self.times), 0.0)

    def same_stamps(self, other: 'FieldSeries') -> bool:
        return (
            self.grid.compatible(other.grid)
            and len(self.times) == len(other.times)
            and np.allclose(self.times, other.times, rtol=0.0, atol=1e-12)
        )

    @classmethod
    def from_arrays(cls, grid: GridSpec, times: Sequence[float], arrays, **kwargs):
        return cls(grid, np.asarray(times, dtype=float), tuple(ScalarField(grid, a) for a in arrays), **kwargs)


@dataclass(frozen=True, eq=False)
class OccupancyHistory(FieldSeries):
    """History of a relaxed indicator; values are clamped to [0, 1] on write."""

    def _admit(self, field: ScalarField) -> ScalarField:
        if field.values.min() < 0.0 or field.values.max() > 1.0:
            return field.with_values(np.clip(field.values, 0.0, 1.0))
        return field

    @classmethod
    def constant(cls, grid: GridSpec, field: ScalarField, times=None) -> 'OccupancyHistory':
        times = grid.time_stamps if times is None else np.asarray(times, dtype=float)
        return cls(grid, times, tuple(field for _ in times))


class ShapeKind(str, Enum):
    BALL = 'ball'
    UNION_OF_BALLS = 'union_of_balls'
    PLANE = 'plane'
    CUSTOM = 'custom_signed_distance'


@dataclass(frozen=True)
class ShapeSpec:
    """Initial set K0, described by primitives whose signed distance is positive inside."""

    kind: ShapeKind
    centers: tuple = ()
    radii: tuple = ()
    normal: tuple | None = None
    offset: float = 0.0
    distance: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        kind = ShapeKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'centers', tuple(tuple(float(c) for c in center) for center in self.centers))
        object.__setattr__(self, 'radii', tuple(float(r) for r in self.radii))
        if kind in (ShapeKind.BALL, ShapeKind.UNION_OF_BALLS):
            if not self.radii or len(self.radii) != len(self.centers):
                raise GridError("Ball shapes need one center per radius and at least one primitive")
            if kind is ShapeKind.BALL and len(self.radii) != 1:
                raise GridError("A ball shape has exactly one primitive")
            if min(self.radii) <= 0:
                raise GridError("Ball radii must be positive")
        elif kind is ShapeKind.PLANE:
            if self.normal is None or not np.any(np.asarray(self.normal, dtype=float)):
                raise GridError("A plane needs a nonzero normal")
        elif self.distance is None:
            raise GridError("A custom shape needs a signed distance callable")

    @classmethod
    def ball(cls, center, radius: float) -> 'ShapeSpec':
        return cls(ShapeKind.BALL, centers=(tuple(center),), radii=(radius,))

    @classmethod
    def union_of_balls(cls, centers, radii) -> 'ShapeSpec':
        return cls(ShapeKind.UNION_OF_BALLS, centers=tuple(tuple(c) for c in centers), radii=tuple(radii))

    @classmethod
    def plane(cls, normal, offset: float = 0.0) -> 'ShapeSpec':
        return cls(ShapeKind.PLANE, normal=tuple(float(n) for n in normal), offset=float(offset))

    @classmethod
    def custom(cls, distance: Callable[[np.ndarray], np.ndarray]) -> 'ShapeSpec':
        return cls(ShapeKind.CUSTOM, distance=distance)

    @property
    def dim(self) -> int | None:
        if self.centers:
            return len(self.centers[0])
        if self.normal is not None:
            return len(self.normal)
        return None

    @property
    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered ball containing every ball primitive."""
        return max(math.hypot(*center) + r for center, r in zip(self.centers, self.radii))

    def primitive_distances(self, coords: np.ndarray) -> np.ndarray:
        """Signed distance of each ball primitive, stacked along the first axis."""
        expand = (slice(None),) + (np.newaxis,) * (coords.ndim - 1)
        return np.stack([
            r - np.sqrt(np.sum((coords - np.asarray(c)[expand]) ** 2, axis=0))
            for c, r in zip(self.centers, self.radii)
        ])

    def signed_distance(self, coords: np.ndarray) -> np.ndarray:
        if self.kind is ShapeKind.CUSTOM:
            return np.asarray(self.distance(coords), dtype=float)
        if self.kind is ShapeKind.PLANE:
            normal = np.asarray(self.normal, dtype=float)
            normal = normal / np.linalg.norm(normal)
            projection = np.tensordot(normal, coords, axes=(0, 0))
            return self.offset - projection
        return self.primitive_distances(coords).max(axis=0)


def signed_distance_init(grid: GridSpec, shape: ShapeSpec) -> ScalarField:
    """u0 = signed distance to the boundary of K0, positive inside."""
    if shape.dim is not None and shape.dim != grid.dim:
        raise GridError(f"Shape is {shape.dim}-dimensional, grid is {grid.dim}-dimensional")
    values = np.broadcast_to(shape.signed_distance(grid.coordinates), grid.shape)
    outer = values[grid.boundary_mask(1)]
    if outer.max() > -BOUNDARY_MARGIN_NODES * grid.spacing:
        logger.warning(
            "Initial front lies within %d nodes of the box boundary; results near the boundary are unreliable",
            BOUNDARY_MARGIN_NODES,
        )
    return ScalarField(grid, values)


class IndicatorMode(str, Enum):
    SHARP = 'sharp'
    SMOOTHED = 'smoothed'


def indicator(u: ScalarField, mode: str = IndicatorMode.SHARP, band: float | None = None) -> ScalarField:
    """Indicator of {u >= 0}; the smoothed variant ramps linearly from u = -band to u = +band."""
    mode = IndicatorMode(mode)
    if band is not None and band < 0:
        raise GridError("Indicator band must be nonnegative")
    if mode is IndicatorMode.SMOOTHED:
        eps = 2.0 * u.grid.spacing if band is None else band
        if eps > 0:
            return u.with_values(np.clip((u.values + eps) / (2.0 * eps), 0.0, 1.0))
    return u.with_values((u.values >= 0.0).astype(float))


def l1_distance(a: FieldSeries, b: FieldSeries) -> float:
    """Discrete space-time L1 distance: sum of |a - b| h^N weighted by each stamp's duration."""
    if not a.same_stamps(b):
        raise GridError("L1 distance needs histories on the same grid and time stamps")
    diff = np.abs(a.stack() - b.stack())
    per_step = diff.reshape(len(a), -1).sum(axis=1) * a.grid.cell_volume
    return float(np.dot(per_step, a.time_weights()))


def volume(chi: ScalarField) -> float:
    return float(np.sum(chi.values * chi.grid.quadrature_weights))


def effective_radius(vol: float, dim: int) -> float:
    """Radius of the ball with the given volume."""
    return (max(vol, 0.0) / UNIT_BALL_VOLUME[dim]) ** (1.0 / dim)


def discrete_lipschitz(values: np.ndarray, spacing: float) -> float:
    """Largest difference quotient over adjacent node pairs."""
    return max(float(np.max(np.abs(np.diff(values, axis=axis)))) for axis in range(values.ndim)) / spacing
