from frontflow.management.base import ScenarioCommand


class Command(ScenarioCommand):
    help = (
        "Integrate the radial barrier ODE of a scenario and check that the front stays inside it. "
        "Exits with 5 on a containment violation."
    )

    def execute_scenario(self, processor):
        return processor.barrier()
