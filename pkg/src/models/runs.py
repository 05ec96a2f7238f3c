import enum
from dataclasses import dataclass

from src.models.space import Configuration


class RunStatus(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    SUCCESS = "SUCCESS"
    TIMEOUT = "TIMEOUT"
    CRASHED = "CRASHED"
    MEMOUT = "MEMOUT"
    WRONG_ANSWER = "WRONG_ANSWER"

    @property
    def solved(self) -> bool:
        return self in (RunStatus.SAT, RunStatus.UNSAT, RunStatus.SUCCESS)


class ExpectedStatus(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class RunSpec:
    """The (configuration, instance, seed) triple plus the limits one run executes under."""

    config: Configuration
    instance_id: str
    seed: int
    cutoff_seconds: float
    memory_limit_mb: int


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    runtime: float
    # True iff the run was stopped at a cutoff below the scenario's maximum; its cost is a lower bound.
    capped: bool = False

    @property
    def solved(self) -> bool:
        return self.status.solved


@dataclass(frozen=True)
class RunRecord:
    """One ledger entry: which slot of the instance/seed order was run, and how it went."""

    config: Configuration
    instance_id: str
    seed: int
    outcome: RunOutcome
    cutoff_seconds: float
