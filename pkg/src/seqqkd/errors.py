"""Exception hierarchy for the simulator."""


class SimulationError(ValueError):
    """Base class for every error raised by seqqkd."""


class EmptyState(SimulationError):
    pass


class DuplicatePath(SimulationError):
    pass


class ZeroNorm(SimulationError):
    pass


class UnknownPath(SimulationError):
    pass


class BasisIncomplete(SimulationError):
    pass


class BadWeights(SimulationError):
    pass


class UnknownLetter(SimulationError):
    pass


class PolicyLengthMismatch(SimulationError):
    pass


class LengthMismatch(SimulationError):
    pass


class ConfigInvalid(SimulationError):
    pass


class BadPath(SimulationError):
    pass


class MissingIndices(SimulationError):
    """Raised by merge when some key indices are held by nobody."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"{len(self.missing)} key indices uncovered: {self.missing[:10]}")


class ConflictingBits(SimulationError):
    def __init__(self, conflicts):
        self.conflicts = sorted(conflicts)
        super().__init__(f"partial keys disagree at indices {self.conflicts[:10]}")
