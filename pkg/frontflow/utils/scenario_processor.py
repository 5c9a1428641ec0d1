import logging
import time
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

from django.conf import settings
from django.db import DatabaseError

from frontflow.models import ScenarioRun
from frontflow.serializers.reports import CertificateSerializer, RunPayloadSerializer, ScenarioRunSerializer
from frontflow.solvers import artifacts
from frontflow.solvers.barriers import barrier_ode, containment_check
from frontflow.solvers.exceptions import ScenarioConfigError
from frontflow.solvers.fixedpoint import FixedPointConfig, relaxed_iterate
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
from frontflow.solvers.heat import lemma_bounds_check
from frontflow.solvers.levelset import StepperConfig, solve_frozen
from frontflow.solvers.velocity import (
    Constant,
    CurvatureOnly,
    Dislocation,
    FitzhughNagumo,
    ScalarFunction,
    VelocityProvider,
    VolumeDependent,
    build_kernel,
    nonnegative_velocity,
)
from frontflow.utils.scenario_config import load_scenario

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 1
    RUNTIME_VIOLATION = 2
    NOT_CONVERGED = 3
    SUITE_FAILED = 4
    NOT_CONTAINED = 5


@dataclass
class ScenarioOutcome:
    exit_code: ExitCode
    message: str
    summary: dict = field(default_factory=dict)
    certificate: dict | None = None


class ScenarioProcessor:
    """Builds solver objects from a scenario file, runs them and writes the artifacts."""

    def __init__(self, config_path, output_dir=None, seed=None):
        self.config_path = Path(config_path)
        self.config = load_scenario(self.config_path)
        self.seed = seed if seed is not None else self.config.get('seed')
        if self.seed is None:
            self.seed = getattr(settings, 'FRONTFLOW_DEFAULT_SEED', 42)
        self.output_dir = self._resolve_output_dir(output_dir)
        self.grid = self.build_grid()
        self.law = self.build_law()
        self.u0 = self.build_initial()
        self.stepper_config = StepperConfig(**self.config['stepper'])
        self.fp_config = FixedPointConfig(**self.config['fixedpoint'])

    def _resolve_output_dir(self, output_dir):
        configured = self.config['output'].get('directory')
        if output_dir:
            return Path(output_dir)
        if configured:
            return self._relative(configured)
        return Path(settings.FRONTFLOW_OUTPUT_DIR) / self.config_path.stem

    def _relative(self, path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.config_path.parent / path

    # Builders ---------------------------------------------------------------

    def build_grid(self):
        block = self.config['grid']
        return build_grid(block['dim'], block['half_extent'], block['points_per_axis'],
                          block['t_final'], block['dt'])

    @staticmethod
    def build_function(block) -> ScalarFunction:
        return ScalarFunction(
            kind=block['kind'],
            value=block['value'],
            intercept=block['intercept'],
            slope=block['slope'],
            coefficient=block['coefficient'],
            exponent=block['exponent'],
        )

    def build_kernel(self, block):
        if 'path' in block:
            kernel, _ = artifacts.read_field(self._relative(block['path']))
            return kernel
        params = {key: block[key] for key in ('sigma', 'amplitude', 'a1', 'a2', 'value', 'radius_nodes')
                  if block.get(key) is not None}
        return build_kernel(block['name'], self.grid, **params)

    def build_law(self):
        block = self.config['law']
        tag = block['tag']
        if tag == 'constant':
            return Constant(speed=block['speed'])
        if tag == 'curvature_only':
            return CurvatureOnly()
        if tag == 'dislocation':
            return Dislocation(
                kernel=self.build_kernel(block['kernel']),
                drift=block['drift'],
                drift_bound=block.get('drift_bound'),
                with_curvature=block['with_curvature'],
            )
        if tag == 'volume_dependent':
            return VolumeDependent(beta=self.build_function(block['beta']), with_curvature=block['with_curvature'])

        if 'v0_path' in block:
            v0, _ = artifacts.read_field(self._relative(block['v0_path']), self.grid)
        else:
            v0 = ScalarField.constant(self.grid, block['v0'])
        return FitzhughNagumo(
            alpha=self.build_function(block['alpha']),
            g_plus=self.build_function(block['g_plus']),
            g_minus=self.build_function(block['g_minus']),
            v0=v0,
            g_lower=block['g_lower'],
            g_upper=block['g_upper'],
        )

    def build_shape(self) -> ShapeSpec:
        block = self.config['initial']
        if block['kind'] == 'plane':
            return ShapeSpec.plane(block['normal'], block['offset'])
        if block['kind'] == 'ball':
            return ShapeSpec.ball(block['centers'][0], block['radii'][0])
        return ShapeSpec.union_of_balls(block['centers'], block['radii'])

    def build_initial(self):
        return signed_distance_init(self.grid, self.build_shape())

    def build_chi(self) -> OccupancyHistory:
        """Frozen occupancy for single runs: a stored field or the indicator of u0."""
        if 'chi_path' in self.config:
            chi, _ = artifacts.read_field(self._relative(self.config['chi_path']), self.grid)
        else:
            chi = indicator(self.u0)
        return OccupancyHistory.constant(self.grid, chi)

    # Commands ---------------------------------------------------------------

    def run(self) -> ScenarioOutcome:
        """Solve once with frozen occupancy."""
        started = time.perf_counter()
        provider = VelocityProvider(self.law, self.grid)
        u = solve_frozen(provider, self.build_chi(), self.u0, self.grid, self.stepper_config,
                         halt_on_boundary=True)

        self._write_history('u', u)
        artifacts.write_frame(self.output_dir / 'steps.csv', u.steps)
        summary = self._front_summary(u)
        summary['substeps'] = len(u.steps)
        summary['wall_time'] = time.perf_counter() - started
        if provider.tracks_state:
            summary.update(self._write_heat_outputs(provider.v_history(u.times)))
        artifacts.write_flat_text(self.output_dir / 'summary.txt', summary)

        if u.boundary_contact:
            outcome = ScenarioOutcome(ExitCode.RUNTIME_VIOLATION,
                                      f"Front reached the boundary margin at t={u.contact_time:.4g}", summary)
        else:
            outcome = ScenarioOutcome(
                ExitCode.OK, f"Final effective radius {summary['effective_radius_final']:.6g}", summary
            )
        return self._record('run', outcome)

    def iterate(self) -> ScenarioOutcome:
        """Relaxed fixed-point iteration and certificate."""
        result = self._iterate()
        certificate = dict(CertificateSerializer(result.certificate).data)

        self._write_history('u', result.u)
        self._write_history('chi', result.chi)
        artifacts.write_frame(self.output_dir / 'iterations.csv', result.log)
        artifacts.write_flat_text(self.output_dir / 'certificate.txt', result.certificate.as_dict())
        summary = self._front_summary(result.u)
        summary.update({
            'iterations': result.iterations,
            'converged': result.converged,
            'radius_monotone_across_iterations': result.radius_monotone,
        })
        if result.v_history is not None:
            summary.update(self._write_heat_outputs(result.v_history))
        artifacts.write_flat_text(self.output_dir / 'summary.txt', summary)

        if result.u.boundary_contact:
            code, message = ExitCode.RUNTIME_VIOLATION, f"Front reached the boundary margin at t={result.u.contact_time:.4g}"
        elif not result.converged:
            code, message = ExitCode.NOT_CONVERGED, f"No fixed point after {result.iterations} iterations"
        else:
            code, message = ExitCode.OK, f"Converged after {result.iterations} iterations"
        return self._record('iterate', ScenarioOutcome(code, message, summary, certificate))

    def barrier(self) -> ScenarioOutcome:
        """Integrate the radial barrier and check the front stays inside it."""
        block = self.config.get('barrier') or {}
        if block.get('beta') is not None:
            beta = self.build_function(block['beta'])
        elif isinstance(self.law, VolumeDependent):
            beta = self.law.beta
        else:
            raise ScenarioConfigError("The barrier block needs a beta function for this law")
        shape = self.build_shape()
        if block.get('initial_radius') is not None:
            r0 = block['initial_radius']
        elif shape.radii:
            r0 = shape.bounding_radius
        else:
            raise ScenarioConfigError("The barrier block needs an initial_radius for a plane front")
        tol = block.get('tolerance')
        tol = 2.0 * self.grid.spacing if tol is None else tol

        traj = barrier_ode(beta, r0, self.grid.t_final, block.get('ode_dt', 1e-3), self.grid.dim,
                           self.grid.half_extent)
        artifacts.write_frame(self.output_dir / 'trajectory.csv', traj.frame())
        summary = {
            'barrier_initial_radius': r0,
            'barrier_blew_up': traj.blew_up,
            'barrier_final_radius': float(traj.radii[-1]),
        }
        if traj.blew_up:
            summary['blow_up_time'] = traj.blow_up_time
            artifacts.write_flat_text(self.output_dir / 'summary.txt', summary)
            logger.warning("Barrier blew up at t=%.4g; containment not checked", traj.blow_up_time)
            return self._record('barrier', ScenarioOutcome(
                ExitCode.OK, f"Barrier blew up at t={traj.blow_up_time:.4g}; containment skipped", summary,
            ))

        if self.law.depends_on_occupancy:
            u = self._iterate().u
        else:
            u = solve_frozen(VelocityProvider(self.law, self.grid), self.build_chi(), self.u0, self.grid,
                             self.stepper_config)
        report = containment_check(u, traj, tol)
        artifacts.write_frame(self.output_dir / 'containment.csv', report.frame)
        summary.update({
            'contained': report.contained,
            'max_excess': report.max_excess,
            'tolerance': tol,
        })
        if report.first_violation_time is not None:
            summary['first_violation_time'] = report.first_violation_time
        artifacts.write_flat_text(self.output_dir / 'summary.txt', summary)

        if not report.contained:
            return self._record('barrier', ScenarioOutcome(
                ExitCode.NOT_CONTAINED, f"Front left the barrier at t={report.first_violation_time:.4g}", summary,
            ))
        return self._record('barrier', ScenarioOutcome(ExitCode.OK, "Front stayed inside the barrier", summary))

    # Helpers ----------------------------------------------------------------

    def _iterate(self):
        return relaxed_iterate(self.law, self.u0, None, self.grid, self.stepper_config, self.fp_config,
                               halt_on_boundary=True)

    def _front_summary(self, u) -> dict:
        final_volume = volume(indicator(u.final))
        return {
            'scenario': self.config_path.name,
            'law': self.law.tag,
            'dim': self.grid.dim,
            'points_per_axis': self.grid.points_per_axis,
            'spacing': self.grid.spacing,
            't_final': self.grid.t_final,
            't_reached': float(u.times[-1]),
            'volume_final': final_volume,
            'effective_radius_final': effective_radius(final_volume, self.grid.dim),
            'boundary_contact': u.boundary_contact,
            'nonnegative_velocity': nonnegative_velocity(self.law, self.grid, self.grid.t_final),
            'seed': self.seed,
        }

    def _write_history(self, prefix, history):
        output = self.config['output']
        if 'ffld' in output['formats']:
            artifacts.write_history(self.output_dir, prefix, history, output['dump_stride'])
        if 'csv' in output['formats']:
            if self.grid.node_count <= getattr(settings, 'FRONTFLOW_CSV_MAX_NODES', artifacts.DEFAULT_CSV_MAX_NODES):
                artifacts.write_field_csv(self.output_dir / f"{prefix}_final.csv", history.final)
            else:
                logger.warning("Skipping CSV export of %s: grid has %d nodes", prefix, self.grid.node_count)

    def _write_heat_outputs(self, v_history) -> dict:
        self._write_history('v', v_history)
        report = lemma_bounds_check(v_history, self.law.v0, self.law.gamma)
        artifacts.write_frame(self.output_dir / 'heat_bounds.csv', report.frame)
        return {
            'heat_bound_holds': report.bound_holds,
            'heat_bound_max_slack': report.max_bound_slack,
            'heat_k_fit': report.k_fit,
        }

    def _record(self, command, outcome: ScenarioOutcome) -> ScenarioOutcome:
        return record_run(command, outcome, config_path=str(self.config_path), seed=self.seed,
                          output_dir=str(self.output_dir))


def record_run(command, outcome: ScenarioOutcome, config_path='', seed=None, output_dir='') -> ScenarioOutcome:
    """Store the outcome in the run ledger; database trouble never fails a run."""
    payload = RunPayloadSerializer({'summary': outcome.summary, 'certificate': outcome.certificate}).data
    try:
        run = ScenarioRun.objects.create(
            command=command,
            config_path=config_path,
            seed=seed,
            exit_code=int(outcome.exit_code),
            output_dir=output_dir,
            **payload,
        )
        logger.debug("Recorded run %s", ScenarioRunSerializer(run).data)
    except DatabaseError as e:
        logger.error(f"Could not record {command} run: {str(e)}", exc_info=True)
    return outcome
