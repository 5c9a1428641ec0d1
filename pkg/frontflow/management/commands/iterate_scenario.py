from frontflow.management.base import ScenarioCommand


class Command(ScenarioCommand):
    help = (
        "Run the relaxed fixed-point iteration for a scenario and write the iteration log, "
        "the certificate and the final fields. Exits with 3 when the iteration does not converge."
    )

    def execute_scenario(self, processor):
        return processor.iterate()
