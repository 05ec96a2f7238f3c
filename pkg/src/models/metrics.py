import math

from pydantic import BaseModel, ConfigDict, Field


class CostMetric(BaseModel):
    """
    PAR-k: unsolved or failed runs cost k times the maximum cutoff `kappa`.
    """

    model_config = ConfigDict(frozen=True)

    k: int = Field(10, ge=1)
    kappa: float = Field(..., gt=0)

    @property
    def penalty(self) -> float:
        return self.k * self.kappa


class AggregateScore(BaseModel):
    """Mean penalized cost over a set of instances."""

    model_config = ConfigDict(frozen=True)

    mean_cost: float = Field(..., ge=0)
    solved_count: int = Field(..., ge=0)
    attempted_count: int = Field(..., ge=1)
    # True when some contributing run was capped, so the mean only bounds the true cost from below.
    lower_bound: bool = False

    @property
    def timeout_count(self) -> int:
        return self.attempted_count - self.solved_count

    @property
    def total_cost(self) -> float:
        return self.mean_cost * self.attempted_count


class RankingEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    solved_count: int
    mean_runtime_solved: float = math.inf
    par_k: float
    attempted_count: int
