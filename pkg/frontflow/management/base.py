import logging

from django.core.management.base import BaseCommand, CommandError

from frontflow.solvers.exceptions import FrontflowError, ScenarioConfigError
from frontflow.utils.scenario_processor import ExitCode, ScenarioOutcome, ScenarioProcessor

logger = logging.getLogger(__name__)


class ScenarioCommand(BaseCommand):
    """Shared flags and exit-code handling for the scenario commands."""

    requires_config = True

    def add_arguments(self, parser):
        parser.add_argument(
            "--config",
            dest="config_path",
            required=self.requires_config,
            help="Path to the YAML scenario file.",
        )
        parser.add_argument(
            "--out",
            dest="output_dir",
            help="Output directory. Defaults to the scenario's output block or FRONTFLOW_OUTPUT_DIR.",
        )
        parser.add_argument(
            "--seed",
            type=int,
            help="Seed for every randomized input. Overrides the scenario's seed.",
        )
        parser.add_argument(
            "--quiet",
            action="store_true",
            help="Only log warnings and errors.",
        )

    def execute_scenario(self, processor: ScenarioProcessor) -> ScenarioOutcome:
        raise NotImplementedError

    def build_processor(self, options) -> ScenarioProcessor:
        try:
            return ScenarioProcessor(
                options["config_path"],
                output_dir=options.get("output_dir"),
                seed=options.get("seed"),
            )
        except (FrontflowError, OSError) as e:
            raise CommandError(f"Configuration error: {e}", returncode=ExitCode.CONFIG_ERROR)

    def run(self, options) -> ScenarioOutcome:
        processor = self.build_processor(options)
        try:
            return self.execute_scenario(processor)
        except ScenarioConfigError as e:
            raise CommandError(f"Configuration error: {e}", returncode=ExitCode.CONFIG_ERROR)
        except FrontflowError as e:
            logger.error(f"Run failed: {str(e)}", exc_info=True)
            raise CommandError(f"Runtime violation: {e}", returncode=ExitCode.RUNTIME_VIOLATION)

    def handle(self, *args, **options):
        frontflow_logger = logging.getLogger("frontflow")
        previous_level = frontflow_logger.level
        if options["quiet"]:
            frontflow_logger.setLevel(logging.WARNING)
        try:
            outcome = self.run(options)
        finally:
            frontflow_logger.setLevel(previous_level)

        if outcome.exit_code != ExitCode.OK:
            raise CommandError(outcome.message, returncode=int(outcome.exit_code))
        if not options["quiet"]:
            self.stdout.write(self.style.SUCCESS(outcome.message))
