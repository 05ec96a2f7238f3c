import math
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.config import (
    DEFAULT_CORES,
    DEFAULT_MEMORY_LIMIT_MB,
    DEFAULT_PAR_K,
    DEFAULT_WALLCLOCK_BUDGET,
)
from src.models.metrics import CostMetric
from src.models.runs import ExpectedStatus, RunOutcome
from src.models.space import Configuration, ParameterSpace


@runtime_checkable
class InProcessTarget(Protocol):
    """A target algorithm evaluated inside the framework process instead of via a wrapper."""

    def evaluate(self, config: Configuration, instance_id: str, seed: int, cutoff: float) -> RunOutcome: ...


class InstanceEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    instance_id: str = Field(..., min_length=1)
    expected: ExpectedStatus = ExpectedStatus.UNKNOWN


class InstanceSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    instances: tuple[InstanceEntry, ...]

    @field_validator("instances")
    @classmethod
    def _non_empty_unique(cls, instances):
        if not instances:
            raise ValueError("instance set is empty")
        ids = [entry.instance_id for entry in instances]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate instance ids: {', '.join(duplicates)}")
        return instances

    @classmethod
    def of(cls, ids, expected: dict[str, ExpectedStatus] | None = None) -> "InstanceSet":
        expected = expected or {}
        return cls(
            instances=tuple(
                InstanceEntry(instance_id=i, expected=expected.get(i, ExpectedStatus.UNKNOWN)) for i in ids
            )
        )

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(entry.instance_id for entry in self.instances)

    def expected_status(self, instance_id: str) -> ExpectedStatus:
        for entry in self.instances:
            if entry.instance_id == instance_id:
                return entry.expected
        return ExpectedStatus.UNKNOWN

    def __len__(self) -> int:
        return len(self.instances)


class InstanceFeatures(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature_names: tuple[str, ...]
    rows: dict[str, tuple[float, ...]]

    @model_validator(mode="after")
    def _finite_and_rectangular(self):
        width = len(self.feature_names)
        for instance_id, row in self.rows.items():
            if len(row) != width:
                raise ValueError(f"feature row for '{instance_id}' has {len(row)} values, expected {width}")
            if not all(math.isfinite(v) for v in row):
                raise ValueError(f"feature row for '{instance_id}' contains non-finite values")
        return self

    def vector(self, instance_id: str) -> np.ndarray | None:
        row = self.rows.get(instance_id)
        return None if row is None else np.asarray(row, dtype=float)

    def covers(self, instance_ids) -> bool:
        return all(i in self.rows for i in instance_ids)


class Scenario(BaseModel):
    """
    One configuration task. Immutable; `with_space` derives the discretized variant.
    `target` is set for in-process (synthetic) targets, otherwise runs go through
    `target_command` and the wrapper protocol.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    target_command: str
    space: ParameterSpace
    train: InstanceSet
    test: InstanceSet
    features: InstanceFeatures | None = None
    cutoff_seconds: float = Field(..., gt=0, allow_inf_nan=False)
    memory_limit_mb: int = Field(DEFAULT_MEMORY_LIMIT_MB, gt=0)
    wallclock_budget_seconds: float = Field(DEFAULT_WALLCLOCK_BUDGET, gt=0)
    cores: int = Field(DEFAULT_CORES, ge=1)
    par_k: int = Field(DEFAULT_PAR_K, ge=1)
    deterministic: bool = False
    seed: int = 0
    execdir: Path | None = None
    instance_info: str = "0"
    target: Any = None

    @model_validator(mode="after")
    def _disjoint_sets(self):
        overlap = sorted(set(self.train.ids) & set(self.test.ids))
        if overlap:
            raise ValueError(f"train and test sets overlap: {', '.join(overlap)}")
        if self.target is not None and not isinstance(self.target, InProcessTarget):
            raise ValueError("target must provide evaluate(config, instance_id, seed, cutoff)")
        return self

    @property
    def metric(self) -> CostMetric:
        return CostMetric(k=self.par_k, kappa=self.cutoff_seconds)

    @property
    def in_process(self) -> bool:
        return self.target is not None

    def with_space(self, space: ParameterSpace) -> "Scenario":
        return self.model_copy(update={"space": space})

    def with_cores(self, cores: int) -> "Scenario":
        return self.model_copy(update={"cores": cores})
