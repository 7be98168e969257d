"""Exception hierarchy shared by every stage of the pipeline."""


class ReachEntropyError(Exception):
    """Base class; ``stage`` and ``hint`` are filled in by the orchestrator."""

    stage = None
    hint = None


class DomainError(ReachEntropyError, ValueError):
    pass


class AbstractionSoundnessError(ReachEntropyError):
    pass


class EmptyTargetError(ReachEntropyError):
    pass


class MalformedControllerError(ReachEntropyError):
    pass


class GraphCycleError(ReachEntropyError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"closed-loop graph has a cycle: {self.cycle}")


class OracleCapError(ReachEntropyError):
    pass


class SoundnessViolation(ReachEntropyError):
    pass


class NonTerminationError(ReachEntropyError):
    pass


class MalformedWitnessError(ReachEntropyError):
    pass


class ConfigError(ReachEntropyError):
    pass
