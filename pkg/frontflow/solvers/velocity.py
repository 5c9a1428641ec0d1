"""Nonlocal normal velocities c[chi](x, t) for the supported front laws."""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np
from scipy import ndimage

from .exceptions import VelocityError
from .grid import FieldSeries, GridSpec, ScalarField, volume
from .heat import HeatState, advance

logger = logging.getLogger(__name__)

SAMPLE_POINTS = 2001


@dataclass(frozen=True)
class ScalarFunction:
    """Real function of one variable as it appears in scenario files.

    constant: value; affine: intercept + slope r; power: intercept + coefficient |r|^exponent.
    A `custom` function wraps any vectorised callable.
    """

    kind: str = 'constant'
    value: float = 0.0
    intercept: float = 0.0
    slope: float = 0.0
    coefficient: float = 1.0
    exponent: float = 1.0
    fn: Callable | None = field(default=None, compare=False)

    KINDS: ClassVar[tuple] = ('constant', 'affine', 'power', 'custom')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise VelocityError(f"Unknown function kind '{self.kind}'")
        if self.kind == 'custom' and self.fn is None:
            raise VelocityError("A custom function needs a callable")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == 'constant':
            return np.full(r.shape, self.value)
        if self.kind == 'affine':
            return self.intercept + self.slope * r
        if self.kind == 'power':
            return self.intercept + self.coefficient * np.abs(r) ** self.exponent
        return np.asarray(self.fn(r), dtype=float)

    @classmethod
    def constant(cls, value: float) -> 'ScalarFunction':
        return cls('constant', value=float(value))

    @classmethod
    def affine(cls, intercept: float, slope: float) -> 'ScalarFunction':
        return cls('affine', intercept=float(intercept), slope=float(slope))

    @classmethod
    def power(cls, coefficient: float, exponent: float, intercept: float = 0.0) -> 'ScalarFunction':
        return cls('power', coefficient=float(coefficient), exponent=float(exponent), intercept=float(intercept))

    @classmethod
    def custom(cls, fn: Callable) -> 'ScalarFunction':
        return cls('custom', fn=fn)


def _as_function(fn) -> Callable:
    if isinstance(fn, (int, float)):
        return ScalarFunction.constant(fn)
    return fn


# Kernels --------------------------------------------------------------------

def _patch_radius(grid: GridSpec, reach: float, radius_nodes: int | None) -> int:
    if radius_nodes is None:
        radius_nodes = math.ceil(reach / grid.spacing)
    return int(min(max(radius_nodes, 1), grid.points_per_axis - 1))


def gaussian_kernel(grid: GridSpec, sigma: float, amplitude: float = 1.0, radius_nodes: int | None = None) -> ScalarField:
    patch = GridSpec.patch(grid.dim, grid.spacing, _patch_radius(grid, 4.0 * sigma, radius_nodes))
    return ScalarField(patch, amplitude * np.exp(-patch.radius ** 2 / (2.0 * sigma ** 2)))


def mexican_hat_kernel(grid: GridSpec, sigma: float, a1: float = 2.0, a2: float = 1.0,
                       radius_nodes: int | None = None) -> ScalarField:
    """Sign-changing kernel a1 exp(-r^2/2 sigma^2) - a2 exp(-r^2/8 sigma^2)."""
    patch = GridSpec.patch(grid.dim, grid.spacing, _patch_radius(grid, 8.0 * sigma, radius_nodes))
    r2 = patch.radius ** 2
    return ScalarField(patch, a1 * np.exp(-r2 / (2.0 * sigma ** 2)) - a2 * np.exp(-r2 / (8.0 * sigma ** 2)))


def constant_kernel(grid: GridSpec, value: float, radius_nodes: int | None = None) -> ScalarField:
    """Constant kernel; without an explicit radius the patch covers every pair of nodes in the box."""
    radius_nodes = grid.points_per_axis - 1 if radius_nodes is None else radius_nodes
    patch = GridSpec.patch(grid.dim, grid.spacing, _patch_radius(grid, 0.0, radius_nodes))
    return ScalarField.constant(patch, value)


def delta_kernel(grid: GridSpec) -> ScalarField:
    patch = GridSpec.patch(grid.dim, grid.spacing, 1)
    values = np.zeros(patch.shape)
    values[(1,) * grid.dim] = 1.0 / grid.cell_volume
    return ScalarField(patch, values)


KERNEL_BUILDERS = {
    'gaussian': gaussian_kernel,
    'constant': constant_kernel,
    'mexican_hat': mexican_hat_kernel,
}


def build_kernel(name: str, grid: GridSpec, **params) -> ScalarField:
    try:
        builder = KERNEL_BUILDERS[name]
    except KeyError:
        raise VelocityError(f"Unknown kernel '{name}'; expected one of {sorted(KERNEL_BUILDERS)}")
    if name == 'constant' and 'value' not in params:
        params['value'] = params.pop('amplitude', 1.0)
    return builder(grid, **params)


def kernel_l1(kernel: ScalarField) -> float:
    return float(np.sum(np.abs(kernel.values)) * kernel.grid.cell_volume)


def kernel_negative_mass(kernel: ScalarField) -> float:
    return float(np.sum(np.clip(-kernel.values, 0.0, None)) * kernel.grid.cell_volume)


def convolve_spatial(kernel: ScalarField, occupancy: ScalarField, t: float | None = None) -> ScalarField:
    """Direct truncated quadrature of sum_y kernel(x - y) occupancy(y) h^N.

    Every node carries the full cell weight h^N, boundary nodes included, rather than
    halved trapezoid weights on the faces. With the discrete delta kernel (mass one,
    value h^-N at the origin) this returns the occupancy itself at every node.
    """
    grid = occupancy.grid
    if kernel.grid.dim != grid.dim:
        raise VelocityError(f"Kernel is {kernel.grid.dim}D, occupancy is {grid.dim}D")
    if not math.isclose(kernel.grid.spacing, grid.spacing, rel_tol=1e-9):
        raise VelocityError(
            f"Kernel spacing {kernel.grid.spacing:.6g} does not match grid spacing {grid.spacing:.6g}"
        )
    result = ndimage.convolve(occupancy.values, kernel.values, mode='constant', cval=0.0)
    return occupancy.with_values(result * grid.cell_volume)


# Laws -----------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityLaw:
    tag: ClassVar[str] = ''
    depends_on_occupancy: ClassVar[bool] = True

    @property
    def curvature(self) -> bool:
        return getattr(self, 'with_curvature', False)

    def nonnegative(self, grid: GridSpec, t_final: float) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(VelocityLaw):
    speed: float = 1.0

    tag: ClassVar[str] = 'constant'
    depends_on_occupancy: ClassVar[bool] = False

    def nonnegative(self, grid, t_final):
        return self.speed >= 0


@dataclass(frozen=True)
class CurvatureOnly(VelocityLaw):
    tag: ClassVar[str] = 'curvature_only'
    depends_on_occupancy: ClassVar[bool] = False

    @property
    def curvature(self) -> bool:
        return True

    def nonnegative(self, grid, t_final):
        return True


@dataclass(frozen=True)
class Dislocation(VelocityLaw):
    """Velocity c0(., t) * 1_K + c1(x, t).

    `kernel` is a ScalarField patch or a FieldSeries of patches over time. `drift` is a
    constant, a callable (coordinates, t) -> array, or a FieldSeries on the grid.
    """

    kernel: ScalarField | FieldSeries = None
    drift: float | Callable | FieldSeries = 0.0
    drift_bound: float | None = None
    with_curvature: bool = False

    tag: ClassVar[str] = 'dislocation'

    def __post_init__(self):
        if self.kernel is None:
            raise VelocityError("Dislocation law needs a kernel")
        if isinstance(self.drift, (int, float)):
            bound = abs(float(self.drift)) if self.drift_bound is None else self.drift_bound
            if abs(self.drift) > bound:
                raise VelocityError(f"Drift {self.drift} exceeds its declared bound {bound}")
            object.__setattr__(self, 'drift_bound', bound)
        elif self.drift_bound is None:
            raise VelocityError("A non-constant drift needs a declared bound")
        if isinstance(self.drift, FieldSeries) and np.max(np.abs(self.drift.stack())) > self.drift_bound:
            raise VelocityError("Sampled drift exceeds its declared bound")

    def kernel_at(self, t: float) -> ScalarField:
        return self.kernel.at(t) if isinstance(self.kernel, FieldSeries) else self.kernel

    def drift_at(self, grid: GridSpec, t: float) -> np.ndarray:
        if isinstance(self.drift, (int, float)):
            return np.full(grid.shape, float(self.drift))
        if isinstance(self.drift, FieldSeries):
            return self.drift.at(t).values
        values = np.broadcast_to(np.asarray(self.drift(grid.coordinates, t), dtype=float), grid.shape)
        if np.max(np.abs(values)) > self.drift_bound * (1.0 + 1e-12):
            raise VelocityError(f"Drift exceeds its declared bound {self.drift_bound} at t={t}")
        return values

    @property
    def time_dependent(self) -> bool:
        return isinstance(self.kernel, FieldSeries) or not isinstance(self.drift, (int, float))

    def nonnegative(self, grid, t_final):
        drift_min = float(self.drift) if isinstance(self.drift, (int, float)) else -self.drift_bound
        kernels = self.kernel.fields if isinstance(self.kernel, FieldSeries) else (self.kernel,)
        return drift_min - max(kernel_negative_mass(k) for k in kernels) >= 0


@dataclass(frozen=True)
class FitzhughNagumo(VelocityLaw):
    """Velocity alpha(v) where v solves the heat equation with sources g+ inside and g- outside."""

    alpha: Callable = None
    g_plus: Callable = None
    g_minus: Callable = None
    v0: ScalarField = None
    g_lower: float = 0.0
    g_upper: float = 0.0
    sample_range: tuple = (-10.0, 10.0)

    tag: ClassVar[str] = 'fitzhugh_nagumo'

    def __post_init__(self):
        if None in (self.alpha, self.g_plus, self.g_minus, self.v0):
            raise VelocityError("Fitzhugh-Nagumo law needs alpha, g_plus, g_minus and v0")
        for name in ('alpha', 'g_plus', 'g_minus'):
            object.__setattr__(self, name, _as_function(getattr(self, name)))
        lo, hi = self.sample_range
        reach = self.v0.max_abs()
        r = np.linspace(min(lo, -reach), max(hi, reach), SAMPLE_POINTS)
        g_minus, g_plus = self.g_minus(r), self.g_plus(r)
        tol = 1e-12
        if not (np.all(self.g_lower - tol <= g_minus) and np.all(g_minus <= g_plus + tol)
                and np.all(g_plus <= self.g_upper + tol)):
            raise VelocityError(
                f"Sources must satisfy g_lower <= g_minus <= g_plus <= g_upper on [{r[0]:g}, {r[-1]:g}]"
            )

    @property
    def gamma(self) -> float:
        return max(abs(self.g_lower), abs(self.g_upper))

    def nonnegative(self, grid, t_final):
        reach = self.v0.max_abs() + self.gamma * t_final
        r = np.linspace(-reach, reach, SAMPLE_POINTS)
        return bool(np.all(self.alpha(r) >= 0))


@dataclass(frozen=True)
class VolumeDependent(VelocityLaw):
    beta: Callable = None
    with_curvature: bool = False

    tag: ClassVar[str] = 'volume_dependent'

    def __post_init__(self):
        if self.beta is None:
            raise VelocityError("Volume-dependent law needs beta")
        object.__setattr__(self, 'beta', _as_function(self.beta))

    def speed_bound(self, grid: GridSpec) -> float:
        return float(np.max(np.abs(self.beta(np.linspace(0.0, grid.box_volume, SAMPLE_POINTS)))))

    def nonnegative(self, grid, t_final):
        return bool(np.all(self.beta(np.linspace(0.0, grid.box_volume, SAMPLE_POINTS)) >= 0))


LAWS = {law.tag: law for law in (Constant, CurvatureOnly, Dislocation, FitzhughNagumo, VolumeDependent)}


def dislocation_velocity(law: Dislocation, chi: ScalarField, t: float) -> ScalarField:
    if not isinstance(law, Dislocation):
        raise VelocityError(f"Expected a dislocation law, got {law.tag}")
    conv = convolve_spatial(law.kernel_at(t), chi, t)
    return conv.with_values(conv.values + law.drift_at(chi.grid, t))


def volume_velocity(law: VolumeDependent, chi: ScalarField) -> float:
    if not isinstance(law, VolumeDependent):
        raise VelocityError(f"Expected a volume-dependent law, got {law.tag}")
    return float(law.beta(volume(chi)))


def nonnegative_velocity(law: VelocityLaw, grid: GridSpec, t_final: float) -> bool:
    """Whether the nonlocal velocity stays nonnegative for every occupancy."""
    return bool(law.nonnegative(grid, t_final))


class VelocityProvider:
    """Per-step velocity source for the level-set stepper.

    Fitzhugh-Nagumo providers carry the heat state forward in time, so they must be
    prepared in nondecreasing time order by a single owner.
    """

    def __init__(self, law: VelocityLaw, grid: GridSpec, record: bool = True):
        self.law = law
        self.grid = grid
        self.record = record
        self.reset()

    def reset(self):
        self.last_time = 0.0
        self._cache = None
        self.recorded: list[tuple[float, ScalarField]] = []
        self.state = None
        if isinstance(self.law, FitzhughNagumo):
            if not self.law.v0.grid.compatible(self.grid):
                raise VelocityError("v0 lives on a different grid")
            self.state = HeatState(self.law.v0, 0.0, self.law.gamma)
            if self.record:
                self.recorded.append((0.0, self.law.v0))

    @property
    def tracks_state(self) -> bool:
        return self.state is not None

    def prepare(self, t_next: float, chi_history: FieldSeries) -> ScalarField:
        """Velocity field at t_next given the occupancy history."""
        if t_next < self.last_time - 1e-12:
            raise VelocityError(f"Velocity requested at t={t_next} after t={self.last_time}")
        law = self.law

        if isinstance(law, (Constant, CurvatureOnly)):
            speed = law.speed if isinstance(law, Constant) else 0.0
            result = ScalarField.constant(self.grid, speed)
        elif isinstance(law, Dislocation):
            chi = chi_history.at(t_next)
            if self._cache is None or self._cache[0] is not chi or law.time_dependent:
                self._cache = (chi, dislocation_velocity(law, chi, t_next))
            result = self._cache[1]
        elif isinstance(law, VolumeDependent):
            chi = chi_history.at(t_next)
            if self._cache is None or self._cache[0] is not chi:
                self._cache = (chi, ScalarField.constant(self.grid, volume_velocity(law, chi)))
            result = self._cache[1]
        elif isinstance(law, FitzhughNagumo):
            chi = chi_history.at(self.last_time)
            self.state = advance(self.state, chi, law.g_plus, law.g_minus, t_next)
            if self.record and t_next > self.recorded[-1][0] + 1e-12:
                self.recorded.append((t_next, self.state.v))
            result = self.state.v.with_values(law.alpha(self.state.v.values))
        else:
            raise VelocityError(f"Unsupported velocity law {type(law).__name__}")

        self.last_time = max(self.last_time, t_next)
        return result

    def v_history(self, times) -> FieldSeries:
        """Recorded v at the given stamps (Fitzhugh-Nagumo only)."""
        if not self.tracks_state:
            raise VelocityError("Only Fitzhugh-Nagumo providers record a v history")
        recorded_times = np.array([t for t, _ in self.recorded])
        fields = []
        for t in times:
            k = int(np.argmin(np.abs(recorded_times - t)))
            if abs(recorded_times[k] - t) > 1e-9:
                raise VelocityError(f"No v recorded at t={t}")
            fields.append(self.recorded[k][1])
        times = np.asarray(times, dtype=float)
        complete = math.isclose(times[-1], self.grid.t_final, rel_tol=1e-9)
        return FieldSeries(self.grid, times, tuple(fields), complete=complete)
