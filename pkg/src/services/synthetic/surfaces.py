"""
Synthetic target algorithms with analytically known runtime surfaces.

Every surface is a pure function of (configuration, instance, seed), so the framework
can be tested against brute-force optima instead of real solvers.
"""
import hashlib
import logging
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.config import DEFAULT_GRID_SIZE, MAX_ENUMERATION_SIZE, SYNTHETIC_RUNTIME_GRANULARITY
from src.models.metrics import AggregateScore, CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.models.space import INACTIVE, Configuration, ParameterSpace
from src.services.scoring import aggregate
from src.services.space.operations import discretize, enumerate_configurations

SurfaceKind = Literal["valley", "conditional_trap", "crash_region", "forbidden_edge", "two_cluster"]


class CrashRule(BaseModel):
    """Matches a parameter whose value is in `values`, or within [lower, upper] for numerics."""

    model_config = ConfigDict(frozen=True)

    parameter: str
    values: Optional[list[Any]] = None
    lower: Optional[float] = None
    upper: Optional[float] = None

    def matches(self, value: Any) -> bool:
        if value is INACTIVE:
            return False
        if self.values is not None:
            return str(value) in {str(v) for v in self.values}
        if isinstance(value, str):
            return False
        low = -math.inf if self.lower is None else self.lower
        high = math.inf if self.upper is None else self.upper
        return low <= value <= high


class SyntheticSurface(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: SurfaceKind = "valley"
    optimum: dict[str, Any]
    weights: dict[str, float] = Field(default_factory=dict)
    # Normalisation width per numeric parameter (usually hi - lo); 1.0 when absent.
    scales: dict[str, float] = Field(default_factory=dict)
    base_runtime: float = Field(1.0, gt=0)
    # conditional_trap
    switch: Optional[str] = None
    switch_on: str = "on"
    trap_runtime: float = Field(10.0, gt=0)
    # crash_region: a configuration crashes when every rule matches
    crash_rules: list[CrashRule] = Field(default_factory=list)
    # two_cluster: cluster id is the instance id up to the first '_'
    cluster_optima: dict[str, dict[str, Any]] = Field(default_factory=dict)
    cluster_offsets: dict[str, float] = Field(default_factory=dict)
    noise: float = Field(0.0, ge=0)
    granularity: float = Field(SYNTHETIC_RUNTIME_GRANULARITY, gt=0)


def cluster_of(instance_id: str) -> str:
    return Path(instance_id).name.split("_", 1)[0]


def _distance(surface: SyntheticSurface, name: str, value: Any, target: Any) -> float:
    if isinstance(target, str) or isinstance(value, str):
        return 0.0 if str(value) == str(target) else 1.0
    return abs(float(value) - float(target)) / surface.scales.get(name, 1.0)


def _valley(surface: SyntheticSurface, config: Mapping[str, Any], optimum: dict[str, Any], base: float) -> float:
    total = 0.0
    for name, target in optimum.items():
        value = config.get(name, INACTIVE)
        if value is INACTIVE:
            continue
        total += surface.weights.get(name, 1.0) * _distance(surface, name, value, target)
    return base * (1.0 + total)


def _noise_factor(surface: SyntheticSurface, config: Mapping[str, Any], instance_id: str, seed: int) -> float:
    if surface.noise == 0:
        return 1.0
    # Keyed on the active values as text so the wrapper process draws the same noise.
    active = ",".join(f"{k}={v}" for k, v in sorted(config.items()) if v is not INACTIVE)
    key = f"{active}|{instance_id}|{seed}".encode("utf-8")
    rng = np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))
    return math.exp(surface.noise * rng.standard_normal())


def true_runtime(
    surface: SyntheticSurface, config: Mapping[str, Any], instance_id: str, seed: int = 0
) -> float | None:
    """Runtime before the cutoff is applied; None when the configuration crashes."""
    if surface.kind == "crash_region" and surface.crash_rules:
        if all(rule.matches(config.get(rule.parameter, INACTIVE)) for rule in surface.crash_rules):
            return None

    if surface.kind == "conditional_trap":
        if surface.switch is None or str(config.get(surface.switch, INACTIVE)) != surface.switch_on:
            runtime = surface.trap_runtime
        else:
            tuned = {k: v for k, v in surface.optimum.items() if k != surface.switch}
            runtime = _valley(surface, config, tuned, surface.base_runtime)
    elif surface.kind == "two_cluster":
        cluster = cluster_of(instance_id)
        optimum = surface.cluster_optima.get(cluster, surface.optimum)
        runtime = _valley(surface, config, optimum, surface.base_runtime + surface.cluster_offsets.get(cluster, 0.0))
    else:
        runtime = _valley(surface, config, surface.optimum, surface.base_runtime)

    runtime *= _noise_factor(surface, config, instance_id, seed)
    steps = max(1, round(runtime / surface.granularity))
    return steps * surface.granularity


def eval_surface(
    surface: SyntheticSurface, config: Mapping[str, Any], instance_id: str, seed: int = 0, cutoff: float = math.inf
) -> RunOutcome:
    runtime = true_runtime(surface, config, instance_id, seed)
    if runtime is None:
        return RunOutcome(RunStatus.CRASHED, min(surface.base_runtime, cutoff))
    if runtime > cutoff:
        return RunOutcome(RunStatus.TIMEOUT, cutoff)
    return RunOutcome(RunStatus.SUCCESS, runtime)


class SyntheticTarget:
    """In-process target: evaluates a surface instead of spawning a wrapper."""

    def __init__(self, surface: SyntheticSurface):
        self.surface = surface

    def evaluate(self, config: Configuration, instance_id: str, seed: int, cutoff: float) -> RunOutcome:
        return eval_surface(self.surface, config, instance_id, seed, cutoff)

    def __repr__(self):
        return f"<SyntheticTarget(kind={self.surface.kind})>"


def load_surface(path: Path) -> SyntheticSurface:
    return SyntheticSurface.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_surface(surface: SyntheticSurface, path: Path):
    Path(path).write_text(surface.model_dump_json(indent=2), encoding="utf-8")


def score_on(
    surface: SyntheticSurface, config: Configuration, instances, metric: CostMetric
) -> AggregateScore:
    """Exact noise-free PAR-k score of one configuration, one seed-0 run per instance."""
    exact = surface.model_copy(update={"noise": 0.0})
    return aggregate([eval_surface(exact, config, i, 0, metric.kappa) for i in instances], metric)


def brute_force_optimum(
    surface: SyntheticSurface,
    space: ParameterSpace,
    metric: CostMetric,
    train,
    grid: int = DEFAULT_GRID_SIZE,
    limit: int = MAX_ENUMERATION_SIZE,
) -> tuple[Configuration, AggregateScore]:
    """
    Exhaustively scores every valid configuration of the (discretized) space on the
    training instances and returns the best, ties broken by the configuration sort key.
    """
    discrete = space if space.is_discrete else discretize(space, grid)
    best: tuple[Configuration, AggregateScore] | None = None
    count = 0
    for config in enumerate_configurations(discrete, limit):
        count += 1
        score = score_on(surface, config, train, metric)
        if best is None or (score.mean_cost, config.sort_key()) < (best[1].mean_cost, best[0].sort_key()):
            best = (config, score)
    logging.debug(f"Brute force scored {count} configurations; best {best[1].mean_cost:.4g}.")
    return best
