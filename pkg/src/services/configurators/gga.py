"""
Gender-based genetic algorithm for algorithm configuration.

The population is split into a competitive and a noncompetitive gender. Competitive
genomes race each other on a growing prefix of the training instances; race winners
mate with uniformly chosen noncompetitive partners. Races are capped: once one
candidate has finished the prefix, the others only get the time that is left to beat it.
"""
import enum
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from src.core.config import CAP_EPSILON
from src.core.errors import BudgetExhausted, UnsupportedSpaceError
from src.models.scenario import Scenario
from src.models.schemas import ConfiguratorResult, GgaParams
from src.models.space import INACTIVE, Configuration, ParameterSpace, ParameterSpec, ParamKind
from src.services.configurators.evaluator import Budget, RunEvaluator, TrajectoryRecorder
from src.services.execution.pool import RunnerPool
from src.services.execution.runner import RunHandle
from src.services.runhistory import RunHistory
from src.services.scoring import run_cost
from src.services.space.operations import default_configuration, sample_uniform, sample_value

REPAIR_ATTEMPTS = 100
MAX_CONDITION_DEPTH = 2


class Gender(str, enum.Enum):
    COMPETITIVE = "competitive"
    NONCOMPETITIVE = "noncompetitive"


@dataclass(frozen=True)
class Genome:
    config: Configuration
    gender: Gender
    age: int = 0


def intensification_schedule(params: GgaParams, generation: int) -> int:
    """Prefix length for a generation: linear from n_start to n_target, flat after generation_target."""
    n_target = params.n_target if params.n_target is not None else params.n_start
    if params.generation_target <= 1:
        fraction = 1.0
    else:
        fraction = min(1.0, max(0.0, (generation - 1) / (params.generation_target - 1)))
    return int(math.floor(params.n_start + (n_target - params.n_start) * fraction + 0.5))


def check_space_supported(space: ParameterSpace):
    depth = space.condition_depth()
    if depth > MAX_CONDITION_DEPTH:
        raise UnsupportedSpaceError(f"GGA handles condition chains up to depth {MAX_CONDITION_DEPTH}, got {depth}.")
    for clause in space.conditions:
        if space[clause.parent].is_numeric:
            raise UnsupportedSpaceError(
                f"GGA cannot condition '{clause.child}' on the numeric parameter '{clause.parent}'."
            )


def assign_genders(count: int, rng: np.random.Generator) -> list[Gender]:
    """ceil(count/2) competitive labels, the rest noncompetitive, in seeded random order."""
    competitive = math.ceil(count / 2)
    labels = [Gender.COMPETITIVE] * competitive + [Gender.NONCOMPETITIVE] * (count - competitive)
    return [labels[int(i)] for i in rng.permutation(count)]


def random_gender(rng: np.random.Generator) -> Gender:
    return Gender.COMPETITIVE if rng.random() < 0.5 else Gender.NONCOMPETITIVE


# --- Variation ---


def _between(spec: ParameterSpec, first: Any, second: Any, rng: np.random.Generator) -> Any:
    if first is INACTIVE:
        return second
    if second is INACTIVE:
        return first
    if spec.kind is ParamKind.CATEGORICAL:
        return first if rng.random() < 0.5 else second
    low, high = sorted((first, second))
    if low == high:
        return low
    if spec.kind is ParamKind.INTEGER:
        if spec.log_scale:
            draw = math.exp(rng.uniform(math.log(low), math.log(high + 1)))
            return min(int(math.floor(draw)), int(high))
        return int(rng.integers(int(low), int(high) + 1))
    if spec.log_scale:
        value = math.exp(rng.uniform(math.log(low), math.log(high)))
    else:
        value = float(rng.uniform(low, high))
    return min(max(value, low), high)


def _repair(space: ParameterSpace, values: dict, rng: np.random.Generator) -> Configuration | None:
    """Resamples the parameters of matching forbidden clauses; None when no valid variant turns up."""
    for _ in range(REPAIR_ATTEMPTS):
        canonical = space.canonicalize(values)
        clauses = space.matching_forbidden(canonical)
        if not clauses:
            return Configuration(space, canonical)
        for clause in clauses:
            for name in clause.as_dict():
                if canonical[name] is not INACTIVE:
                    canonical[name] = sample_value(space[name], rng)
        values = canonical
    return None


def recombine(parent_c: Genome, parent_n: Genome, rng: np.random.Generator) -> Configuration:
    """
    Crosses a competitive and a noncompetitive parent gene by gene. Categorical genes
    come from either parent; numeric genes are drawn between the parents' values.
    Forbidden children are repaired, or replaced by the competitive parent.
    """
    space = parent_c.config.space
    if parent_c.config == parent_n.config:
        return parent_c.config
    values = {
        spec.name: _between(spec, parent_c.config[spec.name], parent_n.config[spec.name], rng)
        for spec in space.parameters
    }
    child = _repair(space, values, rng)
    return child if child is not None else parent_c.config


def mutate(config: Configuration, rate: float, rng: np.random.Generator) -> Configuration:
    """Re-samples each active gene uniformly with probability `rate`."""
    if rate <= 0:
        return config
    space = config.space
    values = config.as_dict()
    changed = False
    for name in space.topological_order:
        if values[name] is not INACTIVE and rng.random() < rate:
            values[name] = sample_value(space[name], rng)
            changed = True
    if not changed:
        return config
    mutated = _repair(space, values, rng)
    return mutated if mutated is not None else config


def select_partner(noncompetitive: list[Genome], rng: np.random.Generator) -> Genome:
    return noncompetitive[int(rng.integers(len(noncompetitive)))]


# --- Races ---


@dataclass
class _Leaderboard:
    """Best finished prefix total of a race, plus the runs still allowed to beat it."""

    best_total: float = math.inf
    best: Configuration | None = None
    aborted: bool = False
    _running: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def track(self, config: Configuration, handle: RunHandle, spent: float):
        with self._lock:
            self._running[config] = (handle, spent)
            if self.aborted:
                handle.cancel()

    def untrack(self, config: Configuration):
        with self._lock:
            self._running.pop(config, None)

    def finish(self, config: Configuration, total: float):
        with self._lock:
            if self.best is not None and (total, config.sort_key()) >= (self.best_total, self.best.sort_key()):
                return
            self.best_total, self.best = total, config
            for handle, spent in self._running.values():
                if spent >= total:
                    handle.cancel()
                else:
                    handle.tighten(max(CAP_EPSILON, total - spent))

    def abort(self):
        with self._lock:
            self.aborted = True
            for handle, _ in self._running.values():
                handle.cancel()


class GGA:
    def __init__(
        self,
        scenario: Scenario,
        budget: Budget,
        seed: int,
        params: GgaParams | None = None,
        pool: RunnerPool | None = None,
        ledger_path: Path | None = None,
    ):
        check_space_supported(scenario.space)
        self.scenario = scenario
        self.params = (params or GgaParams()).resolved(len(scenario.train))
        self.metric = scenario.metric
        self.history = RunHistory(
            scenario.train.ids,
            self.metric,
            deterministic=scenario.deterministic,
            seed=seed,
            max_passes=1,
            ledger_path=ledger_path,
        )
        self.budget = budget
        self.evaluator = RunEvaluator(scenario, self.history, budget, pool)
        self.trajectory = TrajectoryRecorder(budget, self.history)
        self.rng = np.random.default_rng(seed)
        # One candidate per race would mean no selection at all.
        self.race_size = max(2, self.params.units)
        self.incumbent: Configuration | None = None
        self._finalists: list[Configuration] = []

    # --- Racing ---

    def _run_prefix(
        self, config: Configuration, prefix_len: int, board: _Leaderboard, evaluator: RunEvaluator
    ) -> float | None:
        """Runs `config` through the prefix while it can still beat the leader; None once it cannot."""
        spent = 0.0
        for index in range(prefix_len):
            if board.aborted:
                return None
            existing = self.history.record(config, index)
            if existing is not None and not existing.outcome.capped:
                spent += run_cost(existing.outcome, self.metric)
            else:
                cutoff = min(self.metric.kappa, max(CAP_EPSILON, board.best_total - spent))
                if existing is not None and existing.outcome.runtime >= cutoff:
                    return None
                handle = RunHandle(cutoff)
                board.track(config, handle, spent)
                try:
                    outcome = evaluator.run_slot(config, index, cutoff=cutoff, handle=handle)
                finally:
                    board.untrack(config)
                if outcome.capped:
                    return None
                spent += run_cost(outcome, self.metric)
            if spent > board.best_total:
                return None
        return spent

    def race(
        self, genomes: list[Genome], prefix_len: int, evaluator: RunEvaluator | None = None
    ) -> tuple[Configuration, float]:
        """
        Tournament over the first `prefix_len` slots. Returns the winner, the one with the
        lowest exact prefix total (ties to the lexicographically first), and that total.
        """
        evaluator = evaluator or self.evaluator
        prefix_len = min(prefix_len, self.history.max_prefix)
        candidates = sorted({g.config for g in genomes}, key=lambda c: c.sort_key())
        board = _Leaderboard()
        if self.scenario.in_process or self.params.units == 1 or len(candidates) == 1:
            for config in candidates:
                total = self._run_prefix(config, prefix_len, board, evaluator)
                if total is not None:
                    board.finish(config, total)
        else:
            with ThreadPoolExecutor(max_workers=self.params.units, thread_name_prefix="cssc-race") as executor:
                futures = {
                    executor.submit(self._run_prefix, config, prefix_len, board, evaluator): config
                    for config in candidates
                }
                try:
                    for future in as_completed(futures):
                        total = future.result()
                        if total is not None:
                            board.finish(futures[future], total)
                except Exception:
                    board.abort()
                    raise
        logging.debug(
            f"Race of {len(candidates)} on {prefix_len} runs won by {board.best.config_id} "
            f"(total {board.best_total:.4g})."
        )
        return board.best, board.best_total

    # --- Generations ---

    def _initial_population(self) -> list[Genome]:
        size = self.params.population_size
        configs = [default_configuration(self.scenario.space)]
        configs += [sample_uniform(self.scenario.space, self.rng) for _ in range(size - 1)]
        genders = assign_genders(size, self.rng)
        return [Genome(config, gender) for config, gender in zip(configs, genders)]

    def _groups(self, population: list[Genome]) -> list[list[Genome]]:
        competitive = [g for g in population if g.gender is Gender.COMPETITIVE] or list(population)
        order = [competitive[int(i)] for i in self.rng.permutation(len(competitive))]
        return [order[start : start + self.race_size] for start in range(0, len(order), self.race_size)]

    def _tournament(self, population: list[Genome], prefix_len: int) -> list[tuple[Genome, list[Genome], float]]:
        results = []
        for group in self._groups(population):
            winner, total = self.race(group, prefix_len)
            genome = next(g for g in group if g.config == winner)
            results.append((genome, group, total))
            if winner not in self._finalists:
                self._finalists.append(winner)
        return results

    def _next_generation(self, population: list[Genome], results: list[tuple[Genome, list[Genome], float]]):
        """Mates winners, ages everyone, and restores the population size, oldest out first."""
        noncompetitive = [g for g in population if g.gender is Gender.NONCOMPETITIVE]
        offspring = []
        for winner, group, _ in results:
            for _ in range(len(group)):
                partner = select_partner(noncompetitive, self.rng) if noncompetitive else winner
                child = mutate(recombine(winner, partner, self.rng), self.params.mutation_rate, self.rng)
                offspring.append(Genome(child, random_gender(self.rng)))

        winners = {id(winner) for winner, _, _ in results}
        survivors = []
        for genome in population:
            aged = replace(genome, age=genome.age + 1)
            is_winner = id(genome) in winners
            if is_winner or aged.age <= self.params.max_age:
                survivors.append((1 if is_winner else 0, aged))

        # Removal order: plain survivors by age, then aged winners, offspring last.
        ranked = sorted(survivors, key=lambda item: (item[0], -item[1].age)) + [(2, child) for child in offspring]
        excess = len(ranked) - self.params.population_size
        if excess > 0:
            ranked = ranked[excess:]
        population = [genome for _, genome in ranked]
        while len(population) < self.params.population_size:
            population.append(Genome(sample_uniform(self.scenario.space, self.rng), random_gender(self.rng)))
        return population

    def _update_incumbent(self, results: list[tuple[Genome, list[Genome], float]], prefix_len: int):
        best, total = min(((g.config, t) for g, _, t in results), key=lambda item: (item[1], item[0].sort_key()))
        if best != self.incumbent:
            self.incumbent = best
            self.trajectory.record(best, total / prefix_len)

    def _final_race(self) -> Configuration:
        finalists = self._finalists
        if len(finalists) == 1:
            return finalists[0]
        # Validation of the finalists on the full training prefix is not charged to the search budget.
        evaluator = RunEvaluator(self.scenario, self.history, Budget(), self.evaluator.pool)
        genomes = [Genome(config, Gender.COMPETITIVE) for config in finalists]
        winner, total = self.race(genomes, self.history.max_prefix, evaluator)
        logging.info(f"GGA final race among {len(finalists)} finalists won by {winner.config_id}.")
        if winner != self.incumbent:
            self.incumbent = winner
            self.trajectory.record(winner, total / self.history.max_prefix)
        return winner

    def run(self) -> ConfiguratorResult:
        default = default_configuration(self.scenario.space)
        previous: list[Configuration] = []
        try:
            population = self._initial_population()
            for generation in range(1, self.params.generation_max + 1):
                prefix_len = min(intensification_schedule(self.params, generation), self.history.max_prefix)
                previous, self._finalists = self._finalists, []
                results = self._tournament(population, prefix_len)
                self._update_incumbent(results, prefix_len)
                logging.debug(f"GGA generation {generation}: {len(results)} races on {prefix_len} runs.")
                if generation < self.params.generation_max:
                    population = self._next_generation(population, results)
            logging.info(f"GGA finished {self.params.generation_max} generations.")
        except BudgetExhausted:
            logging.info(f"GGA stopped: {self.budget}.")
            self._finalists = list(dict.fromkeys(self._finalists + previous))

        if not self._finalists and self.incumbent is not None:
            self._finalists = [self.incumbent]
        if not self._finalists:
            logging.warning("Budget exhausted before any complete race; returning the default configuration.")
            incumbent = default
        else:
            incumbent = self._final_race()
        return ConfiguratorResult(
            configurator="gga",
            incumbent=incumbent,
            trajectory=self.trajectory.entries,
            history=self.history,
            runs_used=self.budget.runs_used,
        )


def run_gga(
    scenario: Scenario,
    budget: Budget,
    seed: int,
    params: GgaParams | None = None,
    pool: RunnerPool | None = None,
    ledger_path: Path | None = None,
) -> ConfiguratorResult:
    return GGA(scenario, budget, seed, params, pool, ledger_path).run()
