"""Exception types shared across the library.

Exit-code mapping used by the CLI: ConfigError -> 2, TrainingError -> 3,
SweepInfeasibleError -> 4.
"""


class ClbenchError(Exception):
    """Base class for all library errors."""


class ConfigError(ClbenchError):
    """Config file missing, unparsable, or violating the schema/invariants."""

    def __init__(self, message: str, key_path: str | None = None):
        self.key_path = key_path
        if key_path:
            message = f"{message} (at '{key_path}')"
        super().__init__(message)


class DataError(ClbenchError):
    """Catalog or task-sequence construction failed."""


class ReplayBufferError(ClbenchError):
    """Exemplar buffer misuse (zero capacity with a replay method, empty herding input)."""


class MethodNotSupportedError(ClbenchError):
    """A registered method stub was invoked; the method is out of this build's scope."""


class LifecycleError(ClbenchError):
    """Learner hooks called out of contract order."""


class MetricError(ClbenchError):
    """Metric undefined for the given accuracy matrix (e.g. BWT with a single task)."""


class TrainingError(ClbenchError):
    """An experiment failed mid-run; a partial record may have been saved."""


class SweepInfeasibleError(ClbenchError):
    """No memory-sweep target is reachable for the method's minimum footprint."""
