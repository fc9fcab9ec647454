"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by rydberg_sps."""


class ConfigError(SimulationError, ValueError):
    pass


class FitError(SimulationError):
    pass


class DegeneratePerturbationError(SimulationError):
    pass


class SingularEliminationError(SimulationError):
    def __init__(self, message, atoms=()):
        super().__init__(message)
        self.atoms = tuple(atoms)


class AssemblyError(SimulationError):
    pass


class FrameError(SimulationError):
    pass


class StiffnessError(SimulationError):
    pass


class EmptyTargetError(SimulationError):
    pass


class IntervalError(SimulationError, ValueError):
    pass


class GroupingError(SimulationError, ValueError):
    pass


class ResourceError(SimulationError):
    pass


class ObjectiveError(SimulationError):
    def __init__(self, message, sample_id=None):
        super().__init__(message)
        self.sample_id = sample_id


class OptimizationAbort(SimulationError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
