import math

import pandas as pd
import pytest

from src.core.errors import InsufficientRunsError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.services.configurators.evaluator import Budget, RunEvaluator
from src.services.runhistory import RunHistory, Verdict, compare_capped, compute_cap
from src.services.space.operations import default_configuration

METRIC = CostMetric(k=10, kappa=10.0)


@pytest.fixture
def configs(discrete_space):
    default = default_configuration(discrete_space)
    return default.replace(a="1"), default.replace(a="2")


def _history(instances=("i1", "i2", "i3"), **kwargs):
    return RunHistory(list(instances), METRIC, **kwargs)


class TestSlots:
    def test_deterministic_order_uses_seed_zero(self):
        history = _history(deterministic=True, seed=3)
        assert history.max_prefix == 3
        assert sorted(history.instance_order) == ["i1", "i2", "i3"]
        assert all(history.slot(i)[1] == 0 for i in range(3))

    def test_stochastic_order_cycles_seeds(self):
        history = _history(max_passes=2)
        assert history.max_prefix == 6
        assert history.slot(4) == (history.instance_order[1], 1)

    def test_order_depends_only_on_seed(self):
        assert _history(seed=9).instance_order == _history(seed=9).instance_order

    def test_slot_beyond_prefix(self):
        with pytest.raises(InsufficientRunsError):
            _history(deterministic=True).slot(3)


class TestLedger:
    def test_supersedes_capped_slot(self, configs):
        history = _history(deterministic=True)
        config = configs[0]
        history.add(config, 0, RunOutcome(RunStatus.TIMEOUT, 1.0, capped=True), 1.0)
        assert not history.is_exact(config, 1)
        history.add(config, 0, RunOutcome(RunStatus.SAT, 2.0), 10.0)
        assert history.n_runs(config) == 1
        assert history.is_exact(config, 1)
        assert len(history.records) == 2

    def test_skipping_a_slot_rejected(self, configs):
        with pytest.raises(InsufficientRunsError):
            _history().add(configs[0], 1, RunOutcome(RunStatus.SAT, 1.0), 10.0)

    def test_cost_estimate_over_prefix(self, configs):
        history = _history(deterministic=True)
        config = configs[0]
        history.add(config, 0, RunOutcome(RunStatus.SAT, 1.0), 10.0)
        history.add(config, 1, RunOutcome(RunStatus.TIMEOUT, 10.0), 10.0)
        assert history.cost_estimate(config, 1).mean_cost == 1.0
        assert history.cost_estimate(config, 2).mean_cost == pytest.approx(50.5)
        assert history.prefix_total(config, 2) == pytest.approx(101.0)
        with pytest.raises(InsufficientRunsError):
            history.cost_estimate(config, 3)

    def test_ledger_csv(self, configs, tmp_path):
        path = tmp_path / "ledger.csv"
        history = _history(deterministic=True, ledger_path=path)
        history.add(configs[0], 0, RunOutcome(RunStatus.SAT, 1.5), 10.0)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["config_id", "instance", "seed", "status", "runtime", "capped", "cutoff"]
        assert frame.loc[0, "status"] == "SAT"
        assert history.to_frame().shape == (1, 7)


class TestCapping:
    def test_cap_is_bm_times_incumbent_minus_spent(self, configs):
        incumbent, challenger = configs
        history = _history(deterministic=True)
        history.add(incumbent, 0, RunOutcome(RunStatus.SAT, 1.0), 10.0)
        history.add(incumbent, 1, RunOutcome(RunStatus.SAT, 2.0), 10.0)
        history.add(challenger, 0, RunOutcome(RunStatus.SAT, 0.5), 10.0)
        bound = compute_cap(history, incumbent, challenger, 2, 2.0, METRIC)
        assert bound.provably_worse_threshold == 6.0
        assert bound.cutoff_seconds == 5.5

    def test_cap_never_exceeds_kappa(self, configs):
        incumbent, challenger = configs
        history = _history(deterministic=True)
        history.add(incumbent, 0, RunOutcome(RunStatus.SAT, 9.0), 10.0)
        assert compute_cap(history, incumbent, challenger, 1, 2.0, METRIC).cutoff_seconds == 10.0

    def test_infinite_bm_disables_capping(self, configs):
        history = _history(deterministic=True)
        bound = compute_cap(history, configs[0], configs[1], 1, math.inf, METRIC)
        assert bound.cutoff_seconds == 10.0


class TestCompareCapped:
    def _evaluator(self, scenario):
        history = RunHistory(scenario.train.ids, scenario.metric, deterministic=True)
        return history, RunEvaluator(scenario, history, Budget())

    def test_faster_challenger_wins(self, table_scenario):
        scenario = table_scenario()
        history, evaluator = self._evaluator(scenario)
        default = default_configuration(scenario.space)
        verdict = compare_capped(history, evaluator, default, default.replace(a="2"), 4)
        assert verdict is Verdict.CHALLENGER_BETTER

    def test_slow_challenger_is_capped_early(self, table_scenario):
        scenario = table_scenario({"0": 0.5, "1": 2.0, "2": 9.0})
        history, evaluator = self._evaluator(scenario)
        default = default_configuration(scenario.space)
        challenger = default.replace(a="2")
        verdict = compare_capped(history, evaluator, default, challenger, 4, 2.0)
        assert verdict is Verdict.INCUMBENT_BETTER
        # Capped at bm * 4 * 0.5 = 4 seconds on its first run.
        assert history.n_runs(challenger) == 1
        first = history.record(challenger, 0)
        assert first.outcome.capped and first.cutoff_seconds == 4.0

    def test_equal_costs_tie(self, table_scenario):
        scenario = table_scenario({"0": 1.0, "1": 1.0, "2": 1.0})
        history, evaluator = self._evaluator(scenario)
        default = default_configuration(scenario.space)
        assert compare_capped(history, evaluator, default, default.replace(a="1"), 3) is Verdict.TIE

    def test_capping_does_not_change_the_winner(self, table_scenario):
        scenario = table_scenario({"0": 1.0, "1": 1.2, "2": 0.9})
        default = default_configuration(scenario.space)
        for bm in (1.0, 2.0, math.inf):
            history, evaluator = self._evaluator(scenario)
            assert compare_capped(history, evaluator, default, default.replace(a="1"), 4, bm) is Verdict.INCUMBENT_BETTER
            history, evaluator = self._evaluator(scenario)
            assert compare_capped(history, evaluator, default, default.replace(a="2"), 4, bm) is Verdict.CHALLENGER_BETTER
