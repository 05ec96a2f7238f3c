"""
Iterated local search in discretized configuration spaces.

FocusedILS compares configurations with an adaptive number of runs: the configuration
with fewer runs catches up one run at a time (capped against the other's prefix) until
one dominates, and the winner receives bonus runs. BasicILS compares every pair on a
fixed number of runs.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from src.core.errors import BudgetExhausted, UnsupportedSpaceError
from src.models.metrics import CostMetric
from src.models.scenario import Scenario
from src.models.schemas import ConfiguratorResult, IlsParams
from src.models.space import Configuration
from src.services.configurators.evaluator import Budget, RunEvaluator, TrajectoryRecorder
from src.services.execution.pool import RunnerPool
from src.services.runhistory import RunHistory, Verdict, compare_capped, compute_cap
from src.services.space.operations import default_configuration, neighbors, sample_uniform

# Perturbation rounds in a row that needed no new target run before the search counts as converged.
_MAX_STALE_ITERATIONS = 200


@dataclass(frozen=True)
class IlsState:
    current: Configuration
    incumbent: Configuration
    rng: np.random.Generator
    restart_probability: float
    perturbation_strength: int
    n_basic: int


def dominates(history: RunHistory, first: Configuration, second: Configuration, metric: CostMetric | None = None) -> bool:
    """
    True iff `first` has at least as many runs as `second` and an exact estimate on
    second's prefix that is no worse than second's.
    """
    n_first, n_second = history.n_runs(first), history.n_runs(second)
    if n_second < 1 or n_first < n_second:
        return False
    first_estimate = history.cost_estimate(first, n_second)
    if first_estimate.lower_bound:
        return False
    return first_estimate.mean_cost <= history.cost_estimate(second, n_second).mean_cost


def perturb(state: IlsState) -> Configuration:
    """s random one-exchange steps from the current optimum, or a uniform restart."""
    space = state.current.space
    if state.rng.random() < state.restart_probability:
        return sample_uniform(space, state.rng)
    config = state.current
    for _ in range(state.perturbation_strength):
        options = neighbors(space, config)
        if not options:
            break
        config = options[int(state.rng.integers(len(options)))]
    return config


def accept(old_optimum: Configuration, new_optimum: Configuration, comparison: Verdict) -> Configuration:
    """`comparison` is the verdict of new_optimum (challenger) against old_optimum; ties keep the new one."""
    if comparison in (Verdict.CHALLENGER_BETTER, Verdict.TIE):
        return new_optimum
    return old_optimum


class ParamILS:
    def __init__(
        self,
        scenario: Scenario,
        budget: Budget,
        seed: int,
        params: IlsParams | None = None,
        pool: RunnerPool | None = None,
        ledger_path: Path | None = None,
    ):
        if not scenario.space.is_discrete:
            raise UnsupportedSpaceError("ParamILS needs a discretized space.")
        self.scenario = scenario
        self.params = params or IlsParams()
        self.metric = scenario.metric
        self.history = RunHistory(
            scenario.train.ids,
            self.metric,
            deterministic=scenario.deterministic,
            seed=seed,
            max_passes=self.params.max_passes,
            ledger_path=ledger_path,
        )
        self.budget = budget
        self.evaluator = RunEvaluator(scenario, self.history, budget, pool)
        self.trajectory = TrajectoryRecorder(budget, self.history)
        self.rng = np.random.default_rng(seed)
        self.bm = self.params.bound_multiplier
        self.comparisons_since_improvement = 0
        self.incumbent: Configuration | None = None

    # --- Comparisons ---

    def _basic_compare(self, challenger: Configuration, incumbent: Configuration) -> Verdict:
        n = min(self.params.n_basic, self.history.max_prefix)
        return compare_capped(self.history, self.evaluator, incumbent, challenger, n, self.bm, self.metric)

    def _focused_compare(self, challenger: Configuration, incumbent: Configuration) -> Verdict:
        """Adds runs to whichever side has fewer until one dominates; the winner gets bonus runs."""
        history = self.history
        if challenger == incumbent:
            return Verdict.TIE
        while True:
            first_wins = dominates(history, challenger, incumbent, self.metric)
            second_wins = dominates(history, incumbent, challenger, self.metric)
            if first_wins or second_wins:
                break
            n_challenger, n_incumbent = history.n_runs(challenger), history.n_runs(incumbent)
            if n_challenger <= n_incumbent:
                low, high = challenger, incumbent
            else:
                low, high = incumbent, challenger
            index = history.n_runs(low)
            if index >= history.max_prefix:
                # Both sides at the full prefix: settle on exact costs.
                self.evaluator.extend(challenger, history.max_prefix, exact=True)
                self.evaluator.extend(incumbent, history.max_prefix, exact=True)
                continue
            self.evaluator.extend(high, index + 1, exact=True)
            bound = compute_cap(history, high, low, index + 1, self.bm, self.metric, challenger_done=index)
            self.evaluator.run_slot(low, index, cutoff=bound.cutoff_seconds)

        self.comparisons_since_improvement += 1
        if first_wins and second_wins:
            verdict = Verdict.TIE
        elif first_wins:
            verdict = Verdict.CHALLENGER_BETTER
        else:
            verdict = Verdict.INCUMBENT_BETTER
        winner = challenger if first_wins else incumbent
        bonus = min(history.n_runs(winner) + self.comparisons_since_improvement, history.max_prefix)
        self.evaluator.extend(winner, bonus, exact=True)
        return verdict

    def compare(self, challenger: Configuration, incumbent: Configuration) -> Verdict:
        if self.params.variant == "basic":
            verdict = self._basic_compare(challenger, incumbent)
        else:
            verdict = self._focused_compare(challenger, incumbent)
        if verdict is not Verdict.INCUMBENT_BETTER:
            self._consider_promotion(challenger)
        else:
            self._consider_promotion(incumbent)
        return verdict

    def _train_cost(self, config: Configuration) -> float:
        n = self.history.n_runs(config)
        return self.history.cost_estimate(config, n).mean_cost if n else float("inf")

    def _consider_promotion(self, candidate: Configuration):
        incumbent = self.incumbent
        if incumbent is None or candidate == incumbent:
            return
        if self.params.variant == "basic":
            n = min(self.params.n_basic, self.history.max_prefix)
            if self.history.n_runs(candidate) < n or not self.history.is_exact(candidate, n):
                return
            better = compare_capped(
                self.history, self.evaluator, incumbent, candidate, n, self.bm, self.metric
            ) is Verdict.CHALLENGER_BETTER
        else:
            n_candidate, n_incumbent = self.history.n_runs(candidate), self.history.n_runs(incumbent)
            better = dominates(self.history, candidate, incumbent, self.metric) and (
                n_candidate > n_incumbent
                or self.history.cost_estimate(candidate, n_incumbent).mean_cost
                < self.history.cost_estimate(incumbent, n_incumbent).mean_cost
            )
        if better:
            self.incumbent = candidate
            self.comparisons_since_improvement = 0
            self.trajectory.record(candidate, self._train_cost(candidate))

    # --- Search ---

    def local_search_step(self, state: IlsState) -> IlsState:
        """First-improvement step over a freshly shuffled one-exchange neighbourhood."""
        options = neighbors(self.scenario.space, state.current)
        for i in state.rng.permutation(len(options)):
            candidate = options[int(i)]
            if self.compare(candidate, state.current) is Verdict.CHALLENGER_BETTER:
                return replace(state, current=candidate, incumbent=self.incumbent)
        return state

    def local_search(self, state: IlsState) -> IlsState:
        while True:
            moved = self.local_search_step(state)
            if moved.current == state.current:
                return moved
            state = moved

    def _initial_state(self) -> IlsState:
        default = default_configuration(self.scenario.space)
        self.evaluator.extend(default, 1)
        self.incumbent = default
        self.trajectory.record(default, self._train_cost(default))
        state = IlsState(
            current=default,
            incumbent=default,
            rng=self.rng,
            restart_probability=self.params.restart_probability,
            perturbation_strength=self.params.perturbation_strength,
            n_basic=self.params.n_basic,
        )
        for _ in range(self.params.initial_random):
            candidate = sample_uniform(self.scenario.space, self.rng)
            if self.compare(candidate, state.current) is Verdict.CHALLENGER_BETTER:
                state = replace(state, current=candidate)
        return state

    def run(self) -> ConfiguratorResult:
        default = default_configuration(self.scenario.space)
        try:
            state = self._initial_state()
            state = self.local_search(state)
            stale = 0
            while stale < _MAX_STALE_ITERATIONS:
                runs_before = self.budget.runs_used
                candidate = perturb(state)
                explored = self.local_search(replace(state, current=candidate))
                verdict = self.compare(explored.current, state.current)
                state = replace(state, current=accept(state.current, explored.current, verdict), incumbent=self.incumbent)
                stale = stale + 1 if self.budget.runs_used == runs_before else 0
            logging.info("ParamILS stopped: no new runs were needed for a while; the search has converged.")
        except BudgetExhausted:
            logging.info(f"ParamILS ({self.params.variant}) stopped: {self.budget}.")

        incumbent = self.incumbent
        if incumbent is None or self.history.n_runs(incumbent) == 0:
            logging.warning("Budget exhausted before any complete run; returning the default configuration.")
            incumbent = default
        return ConfiguratorResult(
            configurator=f"paramils-{self.params.variant}",
            incumbent=incumbent,
            trajectory=self.trajectory.entries,
            history=self.history,
            runs_used=self.budget.runs_used,
        )


def run_focused_ils(
    scenario: Scenario,
    budget: Budget,
    seed: int,
    params: IlsParams | None = None,
    pool: RunnerPool | None = None,
    ledger_path: Path | None = None,
) -> ConfiguratorResult:
    params = (params or IlsParams()).model_copy(update={"variant": "focused"})
    return ParamILS(scenario, budget, seed, params, pool, ledger_path).run()


def run_basic_ils(
    scenario: Scenario,
    budget: Budget,
    seed: int,
    params: IlsParams | None = None,
    pool: RunnerPool | None = None,
    ledger_path: Path | None = None,
) -> ConfiguratorResult:
    params = (params or IlsParams()).model_copy(update={"variant": "basic"})
    return ParamILS(scenario, budget, seed, params, pool, ledger_path).run()
