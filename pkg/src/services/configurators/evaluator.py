import logging
import math
import threading
import time
from pathlib import Path

import pandas as pd

from src.core.errors import BudgetExhausted
from src.models.runs import RunOutcome
from src.models.scenario import Scenario
from src.models.schemas import TrajectoryEntry
from src.models.space import Configuration
from src.services.execution.pool import RunnerPool
from src.services.execution.runner import RunHandle, execute_run, make_spec
from src.services.runhistory import RunHistory


class Budget:
    """
    Configuration budget: target evaluations, consumed target seconds and wall-clock
    seconds. Any limit set to zero counts as already exhausted; None means unlimited.
    """

    def __init__(
        self,
        max_runs: int | None = None,
        max_target_seconds: float | None = None,
        max_wallclock: float | None = None,
    ):
        self.max_runs = max_runs
        self.max_target_seconds = max_target_seconds
        self.max_wallclock = max_wallclock
        self.runs_used = 0
        self.target_seconds_used = 0.0
        self._start = time.monotonic()
        self._lock = threading.Lock()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self._start

    @property
    def exhausted(self) -> bool:
        with self._lock:
            if self.max_runs is not None and self.runs_used >= self.max_runs:
                return True
            if self.max_target_seconds is not None and self.target_seconds_used >= self.max_target_seconds:
                return True
        return self.max_wallclock is not None and self.elapsed >= self.max_wallclock

    def check(self):
        if self.exhausted:
            raise BudgetExhausted(
                f"Budget exhausted after {self.runs_used} runs, {self.target_seconds_used:.1f} target seconds."
            )

    def charge(self, outcome: RunOutcome):
        with self._lock:
            self.runs_used += 1
            self.target_seconds_used += outcome.runtime

    def __repr__(self):
        return (
            f"<Budget(runs={self.runs_used}/{self.max_runs}, "
            f"target_s={self.target_seconds_used:.1f}/{self.max_target_seconds}, wallclock={self.max_wallclock})>"
        )


class RunEvaluator:
    """
    Runs ledger slots for a configurator: picks the slot's (instance, seed), executes it,
    charges the budget and records the outcome.
    """

    def __init__(
        self,
        scenario: Scenario,
        history: RunHistory,
        budget: Budget,
        pool: RunnerPool | None = None,
        log_dir: Path | None = None,
    ):
        self.scenario = scenario
        self.history = history
        self.budget = budget
        self.pool = pool
        self.log_dir = log_dir

    def run_slot(
        self, config: Configuration, index: int, cutoff: float | None = None, handle: RunHandle | None = None
    ) -> RunOutcome:
        self.budget.check()
        instance_id, seed = self.history.slot(index)
        cutoff = self.scenario.cutoff_seconds if cutoff is None else min(cutoff, self.scenario.cutoff_seconds)
        spec = make_spec(self.scenario, config, instance_id, seed, cutoff)
        handle = handle or RunHandle(cutoff)
        outcome = execute_run(self.scenario, spec, handle, self.log_dir)
        self.budget.charge(outcome)
        # A handle tightened mid-run lowers the cutoff the record was really run under.
        self.history.add(config, index, outcome, min(cutoff, handle.cutoff))
        return outcome

    def extend(self, config: Configuration, prefix_len: int, exact: bool = True):
        """
        Makes sure `config` has `prefix_len` recorded slots; with `exact`, capped slots
        in the prefix are re-run at the full cutoff. Missing slots of process targets are
        dispatched concurrently through the pool.
        """
        prefix_len = min(prefix_len, self.history.max_prefix)
        needed = []
        for index in range(prefix_len):
            record = self.history.record(config, index)
            if record is None or (exact and record.outcome.capped):
                needed.append(index)
        if not needed:
            return
        if self.pool is None or self.pool.width == 1 or self.scenario.in_process or len(needed) == 1:
            for index in needed:
                self.run_slot(config, index)
            return
        self._extend_concurrently(config, needed)

    def _extend_concurrently(self, config: Configuration, needed: list[int]):
        kappa = self.scenario.cutoff_seconds
        dispatched = []
        for index in needed:
            self.budget.check()
            instance_id, seed = self.history.slot(index)
            dispatched.append((index, self.pool.submit(make_spec(self.scenario, config, instance_id, seed, kappa))))
        # Slots must enter the ledger in order.
        for index, item in dispatched:
            outcome = item.result()
            self.budget.charge(outcome)
            self.history.add(config, index, outcome, kappa)


class TrajectoryRecorder:
    def __init__(self, budget: Budget, history: RunHistory):
        self.budget = budget
        self.history = history
        self.entries: list[TrajectoryEntry] = []

    def record(self, incumbent: Configuration, train_cost: float):
        entry = TrajectoryEntry(
            wallclock_s=round(self.budget.elapsed, 3),
            ledger_runs=len(self.history.records),
            incumbent_id=incumbent.config_id,
            train_cost=train_cost if math.isfinite(train_cost) else -1.0,
        )
        self.entries.append(entry)
        logging.info(f"New incumbent {incumbent.config_id} (train cost {train_cost:.4g}, {entry.ledger_runs} runs).")


def write_trajectory(entries: list[TrajectoryEntry], path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(TrajectoryEntry.model_fields)
    pd.DataFrame([e.model_dump() for e in entries], columns=columns).to_csv(path, index=False)
