from frontflow.management.base import ScenarioCommand


class Command(ScenarioCommand):
    help = "Solve a scenario once with the occupancy held fixed and write dumps, the step log and a summary."

    def execute_scenario(self, processor):
        return processor.run()
