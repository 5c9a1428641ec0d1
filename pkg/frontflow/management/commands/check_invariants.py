from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from frontflow.management.base import ScenarioCommand
from frontflow.solvers import artifacts
from frontflow.utils.invariant_suites import SUITES, InvariantSuites
from frontflow.utils.scenario_processor import ExitCode, ScenarioOutcome, record_run


class Command(ScenarioCommand):
    help = "Run an invariant suite (comparison, heat, green, certificate or all) and write results.csv."

    requires_config = False

    def add_arguments(self, parser):
        parser.add_argument("suite", help=f"One of: {', '.join(SUITES + ('all',))}.")
        super().add_arguments(parser)

    def run(self, options):
        suite = options["suite"]
        if suite not in SUITES + ("all",):
            raise CommandError(f"Unknown suite '{suite}'", returncode=ExitCode.CONFIG_ERROR)

        seed = options.get("seed")
        if seed is None:
            seed = getattr(settings, "FRONTFLOW_DEFAULT_SEED", 42)
        output_dir = Path(options.get("output_dir") or Path(settings.FRONTFLOW_OUTPUT_DIR) / f"check_{suite}")

        results = InvariantSuites(seed=seed).run(suite)
        artifacts.write_frame(output_dir / "results.csv", results)

        failed = results[~results["passed"]]
        summary = {"suite": suite, "checks": len(results), "failed": len(failed)}
        if len(failed):
            outcome = ScenarioOutcome(
                ExitCode.SUITE_FAILED,
                f"{len(failed)} of {len(results)} checks failed: {', '.join(failed['check'])}",
                summary,
            )
        else:
            outcome = ScenarioOutcome(ExitCode.OK, f"All {len(results)} {suite} checks passed", summary)
        return record_run("check", outcome, config_path=options.get("config_path") or "", seed=seed,
                          output_dir=str(output_dir))
