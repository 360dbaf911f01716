"""Exception types shared across the package."""


class MemcoloError(Exception):
    """Base class for every package-specific error."""


class InsufficientData(MemcoloError):
    """Too few samples/points to fit or train."""


class SchemaMismatch(MemcoloError):
    """Feature vectors with incompatible schemas or dimensions."""


class DomainError(MemcoloError):
    """Input outside the mathematical domain of an operation."""


class DegenerateInput(MemcoloError):
    """Inputs that make a calibration problem singular (e.g. x1 == x2)."""


class Unsolvable(MemcoloError):
    """No coefficients of the requested family can fit the data."""


class DuplicateProgram(MemcoloError):
    """Two corpus entries share a checksum."""


class EmptyRegistry(MemcoloError):
    """Nearest-neighbour query against a registry with no records."""


class ParseError(MemcoloError):
    """Malformed registry or config file."""


class VersionError(MemcoloError):
    """Registry file written by an incompatible format version."""


class StateError(MemcoloError):
    """Scheduler/simulator bookkeeping inconsistency (e.g. unknown task)."""


class SpecError(MemcoloError):
    """Invalid workload specification."""


class IncompleteTrace(MemcoloError):
    """Metrics requested on a trace with unfinished tasks."""


class UsageError(MemcoloError):
    """Bad command-line arguments."""


class PredictionError(MemcoloError):
    """Prediction pipeline failure, tagged with the step that failed."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step
