"""Radial barriers, containment checks and the comparison-principle harness."""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import BarrierError, GridError
from .grid import UNIT_BALL_VOLUME, FieldSeries, GridSpec, ScalarField, setting
from .levelset import StepperConfig, solve_frozen
from .velocity import VelocityLaw, VelocityProvider

logger = logging.getLogger(__name__)

BLOW_UP_EXTENT_FACTOR = 10.0
BLOW_UP_STEP_FACTOR = 10.0
COMPARISON_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class BarrierTrajectory:
    times: np.ndarray
    radii: np.ndarray
    blew_up: bool = False
    blow_up_time: float | None = None

    def radius_at(self, t) -> np.ndarray | float:
        """Linear interpolation of R; nan past the stored range."""
        return np.interp(t, self.times, self.radii, right=math.nan)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.times, 'R': self.radii})


def barrier_ode(beta, R0: float, T: float, ode_dt: float, dim: int, half_extent: float = 1.0) -> BarrierTrajectory:
    """RK4 integration of R' = beta(omega_N R^N), R(0) = R0.

    Integration stops with `blew_up` set when R passes 10 box widths, grows tenfold
    within a step, or stops being finite.
    """
    if not R0 > 0 or not ode_dt > 0 or not T > 0:
        raise BarrierError("R0, T and ode_dt must be positive")
    omega = UNIT_BALL_VOLUME[dim]

    def rate(r):
        return float(np.asarray(beta(np.asarray(omega * max(r, 0.0) ** dim))))

    n_steps = max(1, math.ceil(T / ode_dt - 1e-9))
    dt = T / n_steps
    limit = BLOW_UP_EXTENT_FACTOR * 2.0 * half_extent
    times, radii = [0.0], [float(R0)]
    r = float(R0)
    for n in range(n_steps):
        with np.errstate(over='ignore', invalid='ignore'):
            try:
                k1 = rate(r)
                k2 = rate(r + 0.5 * dt * k1)
                k3 = rate(r + 0.5 * dt * k2)
                k4 = rate(r + dt * k3)
                nxt = r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            except OverflowError:
                nxt = math.inf
        t_next = (n + 1) * dt
        if not math.isfinite(nxt) or nxt > limit or (r > 0 and nxt > BLOW_UP_STEP_FACTOR * r):
            logger.warning("Barrier radius blew up at t=%.4g", t_next)
            return BarrierTrajectory(np.array(times), np.array(radii), True, t_next)
        r = max(nxt, 0.0)
        times.append(t_next)
        radii.append(r)
    return BarrierTrajectory(np.array(times), np.array(radii))


def sublinear_growth_check(beta, L1: float, L2: float, dim: int, sample_max: float, samples: int = 2001) -> bool:
    """Sample beta(v) <= L1 + L2 v^(1/N) on a log grid of v in (0, sample_max]."""
    if not (L1 > 0 and L2 > 0):
        raise BarrierError("L1 and L2 must be positive")
    v = np.logspace(-8, math.log10(sample_max), samples)
    return bool(np.all(np.asarray(beta(v)) <= L1 + L2 * v ** (1.0 / dim)))


def growth_envelope(R0: float, L1: float, L2: float, dim: int, t):
    c = max(L1, L2 * UNIT_BALL_VOLUME[dim] ** (1.0 / dim))
    t = np.asarray(t, dtype=float)
    return (R0 + c * t) * np.exp(c * t)


@dataclass
class ContainmentReport:
    contained: bool
    first_violation_time: float | None
    max_excess: float
    frame: pd.DataFrame = field(repr=False)


def containment_check(u: FieldSeries, traj: BarrierTrajectory, tol: float) -> ContainmentReport:
    """Check {u(., t) >= 0} lies inside the ball of radius R(t) + tol at every stamp."""
    radius = u.grid.radius
    rows = []
    first = None
    max_excess = -math.inf
    for t, f in u:
        inside = f.values >= 0
        front = float(radius[inside].max()) if inside.any() else 0.0
        R = float(traj.radius_at(t))
        if math.isnan(R):
            rows.append({'t': t, 'R': R, 'front_radius': front, 'excess': math.nan, 'checked': False})
            continue
        excess = front - R if inside.any() else -math.inf
        max_excess = max(max_excess, excess)
        if excess > tol and first is None:
            first = t
        rows.append({'t': t, 'R': R, 'front_radius': front, 'excess': excess, 'checked': True})
    if first is not None:
        logger.warning("Front left the barrier ball at t=%.4g", first)
    return ContainmentReport(
        contained=first is None,
        first_violation_time=first,
        max_excess=max_excess,
        frame=pd.DataFrame(rows, columns=['t', 'R', 'front_radius', 'excess', 'checked']),
    )


def random_ordered_pairs(u0: ScalarField, count: int, rng: np.random.Generator):
    """Ordered pairs (a, b) with a <= b nodewise.

    The first two pairs are (u0, u0) and (u0, u0 + 1); the rest add dyadic noise,
    which keeps b - a >= 0 exact in floating point.
    """
    shape = u0.grid.shape
    pairs = [(u0, u0), (u0, u0.with_values(u0.values + 1.0))]
    while len(pairs) < count:
        a = u0.values + rng.integers(-64, 64, size=shape) / 128.0
        b = a + rng.integers(0, 64, size=shape) / 128.0
        pairs.append((u0.with_values(a), u0.with_values(b)))
    return pairs[:count]


@dataclass
class ComparisonReport:
    max_violation: float
    violating_pairs: int
    frame: pd.DataFrame = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.violating_pairs == 0


def _pair_violation(law, chi_history, lower, upper, grid, config) -> float:
    if np.any(lower.values > upper.values):
        raise GridError("Comparison pair is not ordered")
    runs = [
        solve_frozen(VelocityProvider(law, grid), chi_history, u0, grid, config)
        for u0 in (lower, upper)
    ]
    return float(np.max(runs[0].stack() - runs[1].stack()))


def comparison_harness(law: VelocityLaw, chi_history: FieldSeries, pairs, grid: GridSpec,
                       config: StepperConfig | None = None) -> ComparisonReport:
    """Solve each ordered pair with the same frozen occupancy and record the worst ordering breach."""
    pairs = list(pairs)
    workers = max(1, min(len(pairs), setting('FRONTFLOW_THREADS', None) or os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_pair_violation, law, chi_history, a, b, grid, config) for a, b in pairs]
        violations = [f.result() for f in futures]
    frame = pd.DataFrame({'pair': range(len(pairs)), 'max_violation': violations})
    worst = float(max(violations)) if violations else 0.0
    bad = int(np.sum(np.array(violations) > COMPARISON_TOLERANCE))
    if bad:
        logger.error("Comparison principle broken on %d of %d pairs (worst %.3e)", bad, len(pairs), worst)
    return ComparisonReport(max_violation=worst, violating_pairs=bad, frame=frame)
