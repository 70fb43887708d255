"""Exception types raised across the package."""


class AllocError(Exception):
    """Base class for all errors raised by v2v_alloc."""


class ScenarioError(AllocError, ValueError):
    pass


class EmptyCluster(ScenarioError):
    pass


class UnknownVehicleId(ScenarioError):
    pass


class DuplicateVehicle(ScenarioError):
    pass


class UnclusteredVehicle(ScenarioError):
    pass


class NonPositiveQos(ScenarioError):
    pass


class NegativeEpsilon(ScenarioError):
    pass


class GridError(AllocError, ValueError):
    pass


class NonFiniteInput(AllocError, ValueError):
    pass


class ShapeMismatch(AllocError, ValueError):
    pass


class InconsistentInputs(AllocError, ValueError):
    pass


class InternalCheckerDisagreement(AllocError, AssertionError):
    """Matrix-form and set-form conflict checks disagreed (a bug, never expected)."""


class InstanceTooLarge(AllocError, ValueError):
    pass


class InsufficientSubframes(AllocError):
    """A cluster has more unmatched vehicles than free subframes."""


class ConfigInvalid(AllocError, ValueError):
    """Configuration file problem; `line` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class EmptySamples(AllocError, ValueError):
    pass


class ReportWriteError(AllocError, OSError):
    pass
