class FrontflowError(Exception):
    """Base class for every error raised by the frontflow solvers."""


class GridError(FrontflowError, ValueError):
    """Invalid grid parameters, mismatched grids/time stamps or malformed field data."""


class VelocityError(FrontflowError):
    """A velocity law could not be built or evaluated."""


class HeatError(FrontflowError):
    """Invalid arguments to the heat-equation solvers."""


class CFLViolation(FrontflowError):
    """A time step exceeds the stability bound of an explicit scheme."""


class BarrierError(FrontflowError, ValueError):
    """Invalid barrier ODE or growth-check parameters."""


class ScenarioConfigError(FrontflowError):
    """A scenario file could not be parsed or validated."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
