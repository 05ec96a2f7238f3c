import logging
from pathlib import Path

import numpy as np

from src.core.errors import BudgetExhausted, InsufficientDataError
from src.models.scenario import Scenario
from src.models.schemas import ConfiguratorResult, SmacParams
from src.models.space import Configuration
from src.services.configurators.evaluator import Budget, RunEvaluator, TrajectoryRecorder
from src.services.configurators.smac.acquisition import select_challengers
from src.services.configurators.smac.encoder import ConfigurationEncoder
from src.services.configurators.smac.forest import RandomForestModel, dump_trees, fit_forest, log_cost
from src.services.execution.pool import RunnerPool
from src.services.runhistory import RunHistory, Verdict, compare_capped
from src.services.scoring import run_cost
from src.services.space.operations import default_configuration

# Iterations in a row without a new target run before the search counts as converged.
_MAX_STALE_ITERATIONS = 200


class SMAC:
    """
    Sequential model-based configuration: fit a forest on the ledger, pick challengers
    by expected improvement (interleaved with random ones), and race each against the
    incumbent on doubling prefixes of the incumbent's runs.
    """

    def __init__(
        self,
        scenario: Scenario,
        budget: Budget,
        seed: int,
        params: SmacParams | None = None,
        pool: RunnerPool | None = None,
        ledger_path: Path | None = None,
        model_dump_path: Path | None = None,
    ):
        self.scenario = scenario
        self.params = params or SmacParams()
        self.metric = scenario.metric
        self.seed = seed
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
        features = scenario.features if scenario.features and scenario.features.covers(scenario.train.ids) else None
        if scenario.features is not None and features is None:
            logging.warning("Instance features do not cover every training instance; the model ignores them.")
        self.encoder = ConfigurationEncoder(scenario.space, features)
        self.model_dump_path = model_dump_path
        self.incumbent: Configuration | None = None
        self.iteration = 0

    def _train_cost(self, config: Configuration) -> float:
        return self.history.cost_estimate(config, self.history.n_runs(config)).mean_cost

    def _incumbent_log_cost(self) -> float:
        records = self.history.current(self.incumbent)
        return float(np.mean([log_cost(run_cost(r.outcome, self.metric)) for r in records]))

    def fit_model(self) -> RandomForestModel | None:
        try:
            model = fit_forest(self.history, self.encoder, self.params, seed=self.seed + self.iteration)
        except InsufficientDataError:
            return None
        if self.model_dump_path is not None:
            dump_trees(model, self.model_dump_path)
        return model

    def intensify(self, challenger: Configuration) -> bool:
        """
        Races `challenger` against the incumbent on prefixes 1, 2, 4, ... of the
        incumbent's runs. Promotes only on a strict win over the incumbent's full run count.
        """
        incumbent = self.incumbent
        if challenger == incumbent:
            return False
        n_incumbent = self.history.n_runs(incumbent)
        prefix = 1
        while True:
            verdict = compare_capped(
                self.history, self.evaluator, incumbent, challenger, prefix, self.params.bound_multiplier, self.metric
            )
            if verdict is Verdict.INCUMBENT_BETTER:
                return False
            if prefix >= n_incumbent:
                break
            prefix = min(2 * prefix, n_incumbent)
        if verdict is not Verdict.CHALLENGER_BETTER:
            return False
        self.incumbent = challenger
        self.trajectory.record(challenger, self._train_cost(challenger))
        return True

    def run(self) -> ConfiguratorResult:
        default = default_configuration(self.scenario.space)
        try:
            self.evaluator.run_slot(default, 0)
            self.incumbent = default
            self.trajectory.record(default, self._train_cost(default))
            stale = 0
            while stale < _MAX_STALE_ITERATIONS:
                runs_before = self.budget.runs_used
                self.iteration += 1
                model = self.fit_model()
                challengers = select_challengers(
                    model,
                    self.scenario.space,
                    self.incumbent,
                    self.rng,
                    self.params.challengers,
                    self._incumbent_log_cost(),
                    self.params,
                )
                # The incumbent gains one run per iteration until it has the full slot order.
                n_incumbent = self.history.n_runs(self.incumbent)
                if n_incumbent < self.history.max_prefix:
                    self.evaluator.extend(self.incumbent, n_incumbent + 1, exact=True)
                for challenger in challengers:
                    self.intensify(challenger)
                stale = stale + 1 if self.budget.runs_used == runs_before else 0
            logging.info("SMAC stopped: no new runs were needed for a while; the search has converged.")
        except BudgetExhausted:
            logging.info(f"SMAC stopped after {self.iteration} iterations: {self.budget}.")

        incumbent = self.incumbent
        if incumbent is None:
            logging.warning("Budget exhausted before any complete run; returning the default configuration.")
            incumbent = default
        return ConfiguratorResult(
            configurator="smac",
            incumbent=incumbent,
            trajectory=self.trajectory.entries,
            history=self.history,
            runs_used=self.budget.runs_used,
        )


def run_smac(
    scenario: Scenario,
    budget: Budget,
    seed: int,
    params: SmacParams | None = None,
    pool: RunnerPool | None = None,
    ledger_path: Path | None = None,
    model_dump_path: Path | None = None,
) -> ConfiguratorResult:
    return SMAC(scenario, budget, seed, params, pool, ledger_path, model_dump_path).run()
