import math
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.config import (
    BOUND_MULTIPLIER,
    DEFAULT_GRID_SIZE,
    GGA_GENERATION_MAX,
    GGA_GENERATION_TARGET,
    GGA_MAX_AGE,
    GGA_MUTATION_RATE,
    GGA_N_START,
    GGA_POPULATION_SIZE,
    GGA_UNITS,
    ILS_INITIAL_RANDOM,
    ILS_MAX_PASSES,
    ILS_N_BASIC,
    ILS_PERTURBATION_STRENGTH,
    ILS_RESTART_PROBABILITY,
    SMAC_CHALLENGERS,
    SMAC_LOCAL_SEARCH_STARTS,
    SMAC_MAX_FEATURES,
    SMAC_MIN_SAMPLES_LEAF,
    SMAC_NUM_TREES,
    SMAC_RANDOM_SAMPLES,
)
from src.models.metrics import AggregateScore
from src.models.scenario import Scenario
from src.models.space import Configuration

# --- Configurator Parameters ---


class IlsParams(BaseModel):
    """
    Iterated local search settings. `variant` picks FocusedILS (adaptive number of runs)
    or BasicILS (a fixed `n_basic` runs per comparison).
    """

    model_config = ConfigDict(frozen=True)

    variant: Literal["focused", "basic"] = "focused"
    perturbation_strength: int = Field(ILS_PERTURBATION_STRENGTH, ge=1)
    restart_probability: float = Field(ILS_RESTART_PROBABILITY, ge=0, le=1)
    initial_random: int = Field(ILS_INITIAL_RANDOM, ge=0)
    n_basic: int = Field(ILS_N_BASIC, ge=1)
    max_passes: int = Field(ILS_MAX_PASSES, ge=1)
    bound_multiplier: float = Field(BOUND_MULTIPLIER, ge=1)


class GgaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    units: int = Field(GGA_UNITS, ge=1)
    population_size: int = Field(GGA_POPULATION_SIZE, ge=2)
    generation_target: int = Field(GGA_GENERATION_TARGET, ge=1)
    generation_max: int = Field(GGA_GENERATION_MAX, ge=1)
    n_start: int = Field(GGA_N_START, ge=1)
    # None means "number of training instances".
    n_target: Optional[int] = Field(None, ge=1)
    mutation_rate: float = Field(GGA_MUTATION_RATE, ge=0, le=1)
    max_age: int = Field(GGA_MAX_AGE, ge=1)

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.generation_target > self.generation_max:
            raise ValueError("generation_target must not exceed generation_max")
        if self.n_target is not None and self.n_start > self.n_target:
            raise ValueError("n_start must not exceed n_target")
        return self

    def resolved(self, num_train: int) -> "GgaParams":
        """Fills n_target from the training set size, keeping n_start <= n_target."""
        if self.n_target is not None:
            return self
        return self.model_copy(update={"n_target": num_train, "n_start": min(self.n_start, num_train)})


class SmacParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_trees: int = Field(SMAC_NUM_TREES, ge=1)
    max_features: float = Field(SMAC_MAX_FEATURES, gt=0, le=1)
    min_samples_leaf: int = Field(SMAC_MIN_SAMPLES_LEAF, ge=1)
    bootstrap: bool = True
    challengers: int = Field(SMAC_CHALLENGERS, ge=1)
    random_samples: int = Field(SMAC_RANDOM_SAMPLES, ge=1)
    local_search_starts: int = Field(SMAC_LOCAL_SEARCH_STARTS, ge=0)
    local_search_sd: float = Field(0.2, gt=0)
    local_search_neighbors: int = Field(4, ge=1)
    bound_multiplier: float = Field(BOUND_MULTIPLIER, ge=1)
    max_passes: int = Field(ILS_MAX_PASSES, ge=1)


# --- Configurator Results ---


class TrajectoryEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    wallclock_s: float
    ledger_runs: int
    incumbent_id: str
    train_cost: float


class ConfiguratorResult(BaseModel):
    """What every configurator returns: its incumbent, how it got there, and its run ledger."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    configurator: str
    incumbent: Configuration
    trajectory: list[TrajectoryEntry] = Field(default_factory=list)
    history: Any = None
    runs_used: int = 0


# --- Campaign ---


class ApproachSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    configurator: Literal["paramils", "gga", "smac"]
    space_variant: Literal["native", "discretized"] = "native"
    # Independent runs for paramils/smac; gga runs once, `units` wide.
    runs: int = Field(1, ge=1)
    units: int = Field(GGA_UNITS, ge=1)

    @model_validator(mode="after")
    def _paramils_needs_grid(self):
        if self.configurator == "paramils" and self.space_variant != "discretized":
            raise ValueError("paramils only runs on the discretized space")
        return self

    @property
    def label(self) -> str:
        return self.configurator if self.space_variant == "native" else f"{self.configurator}-discretized"


class CampaignPlan(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scenario: Scenario
    approaches: list[ApproachSpec]
    # Per configurator run: wall-clock seconds (process targets) or target seconds (in-process).
    budget_seconds: float = Field(..., ge=0)
    max_runs: Optional[int] = Field(None, ge=0)
    cores: int = Field(1, ge=1)
    seed: int = 0
    grid_size: int = Field(DEFAULT_GRID_SIZE, ge=2)
    ils: IlsParams = IlsParams()
    gga: GgaParams = GgaParams()
    smac: SmacParams = SmacParams()

    @model_validator(mode="after")
    def _unique_labels(self):
        labels = [a.label for a in self.approaches]
        if len(set(labels)) != len(labels):
            raise ValueError("approach labels must be unique")
        return self


class IncumbentRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    approach: str
    run_index: int
    config_id: str
    config: dict[str, str]
    train: AggregateScore


class ApproachOutcome(BaseModel):
    approach: str
    incumbents: list[IncumbentRecord] = Field(default_factory=list)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None and not self.incumbents


class InstanceResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    instance: str
    status: str
    runtime: float
    cost: float


class CampaignReport(BaseModel):
    """
    Campaign summary. Holds no timestamps so identical plans give identical reports
    on deterministic targets.
    """

    scenario_name: str
    num_params: int = 0
    seed: int
    par_k: int
    kappa: float
    approaches: list[ApproachOutcome]
    default_config: dict[str, str]
    default_train: AggregateScore
    selected: Optional[IncumbentRecord] = None
    default_test: AggregateScore
    configured_test: AggregateScore
    default_test_runs: list[InstanceResult]
    configured_test_runs: list[InstanceResult]

    @property
    def selected_label(self) -> str:
        return self.selected.approach if self.selected else "default"

    def all_incumbents(self) -> list[IncumbentRecord]:
        return [inc for outcome in self.approaches for inc in outcome.incumbents]


# --- Analysis ---


class SpeedupRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    num_params: int
    metric_k: int
    # None marks an undefined speedup (neither side solved anything).
    speedup_factor: Optional[float] = Field(None, gt=0)

    @property
    def defined(self) -> bool:
        return self.speedup_factor is not None and math.isfinite(self.speedup_factor)
