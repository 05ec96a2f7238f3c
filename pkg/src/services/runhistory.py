"""
The run ledger shared by all configurators.

Every configuration walks the same scenario-fixed sequence of (instance, seed) slots,
so the first p runs of any two configurations are directly comparable. Records are
append-only: re-running a capped slot adds a record that supersedes the earlier one.
"""
import csv
import enum
import logging
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import pandas as pd

from src.core.config import BOUND_MULTIPLIER, CAP_EPSILON, ILS_MAX_PASSES
from src.core.errors import InsufficientRunsError
from src.models.metrics import AggregateScore, CostMetric
from src.models.runs import RunOutcome, RunRecord
from src.models.space import Configuration
from src.services.scoring import aggregate_by_instance, run_cost

LEDGER_COLUMNS = ["config_id", "instance", "seed", "status", "runtime", "capped", "cutoff"]


class RunHistory:
    def __init__(
        self,
        instances: Sequence[str],
        metric: CostMetric,
        deterministic: bool = False,
        seed: int = 0,
        max_passes: int = ILS_MAX_PASSES,
        ledger_path: Path | None = None,
    ):
        if not instances:
            raise InsufficientRunsError("A run history needs at least one instance.")
        self.metric = metric
        self.deterministic = deterministic
        rng = np.random.default_rng(seed)
        self._order = tuple(instances[i] for i in rng.permutation(len(instances)))
        self.max_prefix = len(self._order) if deterministic else len(self._order) * max(1, max_passes)
        self._records: list[RunRecord] = []
        self._slots: dict[Configuration, list[RunRecord]] = {}
        self._lock = threading.RLock()
        self._ledger_path = Path(ledger_path) if ledger_path else None
        if self._ledger_path:
            self._ledger_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._ledger_path, "w", newline="") as f:
                csv.writer(f).writerow(LEDGER_COLUMNS)

    # --- Instance/seed order ---

    @property
    def instance_order(self) -> tuple[str, ...]:
        return self._order

    def slot(self, index: int) -> tuple[str, int]:
        """The (instance, seed) pair every configuration runs at position `index`."""
        if not 0 <= index < self.max_prefix:
            raise InsufficientRunsError(f"Slot {index} lies beyond the maximum prefix {self.max_prefix}.")
        n = len(self._order)
        seed = 0 if self.deterministic else index // n
        return self._order[index % n], seed

    # --- Ledger ---

    def add(self, config: Configuration, index: int, outcome: RunOutcome, cutoff: float) -> RunRecord:
        instance_id, seed = self.slot(index)
        record = RunRecord(config=config, instance_id=instance_id, seed=seed, outcome=outcome, cutoff_seconds=cutoff)
        with self._lock:
            slots = self._slots.setdefault(config, [])
            if index == len(slots):
                slots.append(record)
            elif index < len(slots):
                slots[index] = record
            else:
                raise InsufficientRunsError(
                    f"Slot {index} skips ahead of the {len(slots)} runs recorded for {config.config_id}."
                )
            self._records.append(record)
            if self._ledger_path:
                with open(self._ledger_path, "a", newline="") as f:
                    csv.writer(f).writerow(
                        [
                            config.config_id,
                            instance_id,
                            seed,
                            outcome.status.value,
                            f"{outcome.runtime:.6g}",
                            int(outcome.capped),
                            f"{cutoff:.6g}",
                        ]
                    )
        return record

    @property
    def records(self) -> tuple[RunRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def configurations(self) -> list[Configuration]:
        with self._lock:
            return list(self._slots)

    def n_runs(self, config: Configuration) -> int:
        with self._lock:
            return len(self._slots.get(config, ()))

    def record(self, config: Configuration, index: int) -> RunRecord | None:
        with self._lock:
            slots = self._slots.get(config, [])
            return slots[index] if index < len(slots) else None

    def current(self, config: Configuration, prefix_len: int | None = None) -> list[RunRecord]:
        """The latest record of each of the first `prefix_len` slots of `config`."""
        with self._lock:
            slots = list(self._slots.get(config, []))
        if prefix_len is None:
            return slots
        if prefix_len > len(slots):
            raise InsufficientRunsError(
                f"Configuration {config.config_id} has {len(slots)} runs, {prefix_len} requested."
            )
        return slots[:prefix_len]

    # --- Estimates ---

    def cost_estimate(self, config: Configuration, prefix_len: int) -> AggregateScore:
        """PAR-k estimate over the first `prefix_len` slots; flagged when any run was capped."""
        if prefix_len < 1:
            raise InsufficientRunsError("A cost estimate needs at least one run.")
        records = self.current(config, prefix_len)
        return aggregate_by_instance([(r.instance_id, r.outcome) for r in records], self.metric)

    def prefix_total(self, config: Configuration, prefix_len: int) -> float:
        return math.fsum(run_cost(r.outcome, self.metric) for r in self.current(config, prefix_len))

    def is_exact(self, config: Configuration, prefix_len: int) -> bool:
        return not any(r.outcome.capped for r in self.current(config, prefix_len))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "config_id": r.config.config_id,
                "instance": r.instance_id,
                "seed": r.seed,
                "status": r.outcome.status.value,
                "runtime": r.outcome.runtime,
                "capped": r.outcome.capped,
                "cutoff": r.cutoff_seconds,
            }
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=LEDGER_COLUMNS)


# --- Adaptive capping ---


@dataclass(frozen=True)
class CapBound:
    cutoff_seconds: float
    provably_worse_threshold: float


class Verdict(str, enum.Enum):
    CHALLENGER_BETTER = "challenger_better"
    INCUMBENT_BETTER = "incumbent_better"
    TIE = "tie"


class SlotRunner(Protocol):
    """Anything that can run one ledger slot of a configuration (see RunEvaluator)."""

    history: RunHistory

    def run_slot(self, config: Configuration, index: int, cutoff: float | None = None) -> RunOutcome: ...

    def extend(self, config: Configuration, prefix_len: int, exact: bool = True) -> None: ...


def compute_cap(
    history: RunHistory,
    incumbent: Configuration,
    challenger: Configuration,
    prefix_len: int,
    bound_multiplier: float = BOUND_MULTIPLIER,
    metric: CostMetric | None = None,
    challenger_done: int | None = None,
) -> CapBound:
    """
    Cutoff for the challenger's next prefix run: whatever is left of bm times the
    incumbent's prefix total, never below epsilon and never above kappa.
    """
    metric = metric or history.metric
    if math.isinf(bound_multiplier):
        return CapBound(cutoff_seconds=metric.kappa, provably_worse_threshold=math.inf)
    incumbent_total = history.prefix_total(incumbent, prefix_len)
    done = min(history.n_runs(challenger), prefix_len) if challenger_done is None else challenger_done
    spent = history.prefix_total(challenger, done) if done else 0.0
    threshold = bound_multiplier * incumbent_total
    cutoff = min(metric.kappa, max(CAP_EPSILON, threshold - spent))
    return CapBound(cutoff_seconds=cutoff, provably_worse_threshold=threshold)


def compare_capped(
    history: RunHistory,
    evaluator: SlotRunner,
    incumbent: Configuration,
    challenger: Configuration,
    prefix_len: int,
    bound_multiplier: float = BOUND_MULTIPLIER,
    metric: CostMetric | None = None,
) -> Verdict:
    """
    Runs the challenger through the first `prefix_len` slots under adaptive capping and
    compares exact prefix costs. A challenger whose run gets capped is never better.
    """
    metric = metric or history.metric
    evaluator.extend(incumbent, prefix_len, exact=True)
    if incumbent == challenger:
        return Verdict.TIE

    for index in range(prefix_len):
        bound = compute_cap(history, incumbent, challenger, prefix_len, bound_multiplier, metric, challenger_done=index)
        spent = history.prefix_total(challenger, index) if index else 0.0
        if spent > bound.provably_worse_threshold:
            return Verdict.INCUMBENT_BETTER

        existing = history.record(challenger, index)
        if existing is not None and not existing.outcome.capped:
            continue
        if existing is not None and existing.cutoff_seconds >= bound.cutoff_seconds:
            # It already failed to finish within the time it has left now.
            return Verdict.INCUMBENT_BETTER

        outcome = evaluator.run_slot(challenger, index, cutoff=bound.cutoff_seconds)
        if outcome.capped:
            return Verdict.INCUMBENT_BETTER
        if history.prefix_total(challenger, index + 1) > bound.provably_worse_threshold:
            return Verdict.INCUMBENT_BETTER

    incumbent_cost = history.cost_estimate(incumbent, prefix_len).mean_cost
    challenger_cost = history.cost_estimate(challenger, prefix_len).mean_cost
    if math.isclose(challenger_cost, incumbent_cost, rel_tol=1e-12, abs_tol=1e-12):
        verdict = Verdict.TIE
    elif challenger_cost < incumbent_cost:
        verdict = Verdict.CHALLENGER_BETTER
    else:
        verdict = Verdict.INCUMBENT_BETTER
    logging.debug(
        f"{challenger.config_id} vs {incumbent.config_id} on {prefix_len} runs: "
        f"{challenger_cost:.4g} vs {incumbent_cost:.4g} -> {verdict.value}"
    )
    return verdict
