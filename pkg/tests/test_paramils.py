import numpy as np
import pytest

from src.core.errors import UnsupportedSpaceError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.models.schemas import IlsParams
from src.services.configurators.evaluator import Budget
from src.services.configurators.paramils import IlsState, ParamILS, accept, dominates, perturb, run_basic_ils, run_focused_ils
from src.services.runhistory import RunHistory, Verdict
from src.services.space.operations import default_configuration, neighbors

METRIC = CostMetric(k=10, kappa=10.0)


def _state(config, rng=None, restart=0.0, strength=3):
    return IlsState(
        current=config,
        incumbent=config,
        rng=rng or np.random.default_rng(0),
        restart_probability=restart,
        perturbation_strength=strength,
        n_basic=5,
    )


class TestDominance:
    def test_more_runs_and_no_worse(self, discrete_space):
        default = default_configuration(discrete_space)
        other = default.replace(a="1")
        history = RunHistory(["i1", "i2"], METRIC, deterministic=True)
        history.add(default, 0, RunOutcome(RunStatus.SAT, 1.0), 10.0)
        history.add(other, 0, RunOutcome(RunStatus.SAT, 1.0), 10.0)
        history.add(other, 1, RunOutcome(RunStatus.SAT, 5.0), 10.0)
        assert dominates(history, other, default)
        assert not dominates(history, default, other)

    def test_capped_estimate_never_dominates(self, discrete_space):
        default = default_configuration(discrete_space)
        other = default.replace(a="1")
        history = RunHistory(["i1"], METRIC, deterministic=True)
        history.add(default, 0, RunOutcome(RunStatus.SAT, 5.0), 10.0)
        history.add(other, 0, RunOutcome(RunStatus.TIMEOUT, 1.0, capped=True), 1.0)
        assert not dominates(history, other, default)


class TestPerturbAndAccept:
    def test_perturbation_walks_the_neighbourhood(self, discrete_space):
        default = default_configuration(discrete_space)
        moved = perturb(_state(default, strength=1))
        assert moved in neighbors(discrete_space, default)

    def test_restart_probability_one_samples_uniformly(self, discrete_space, mocker):
        sample = mocker.patch("src.services.configurators.paramils.sample_uniform", return_value="restarted")
        assert perturb(_state(default_configuration(discrete_space), restart=1.0)) == "restarted"
        sample.assert_called_once()

    def test_ties_keep_the_new_optimum(self, discrete_space):
        old = default_configuration(discrete_space)
        new = old.replace(a="2")
        assert accept(old, new, Verdict.TIE) == new
        assert accept(old, new, Verdict.CHALLENGER_BETTER) == new
        assert accept(old, new, Verdict.INCUMBENT_BETTER) == old


class TestParamILS:
    def test_requires_discrete_space(self, table_scenario, mixed_space):
        scenario = table_scenario().with_space(mixed_space)
        with pytest.raises(UnsupportedSpaceError):
            ParamILS(scenario, Budget(), 0)

    def test_focused_finds_the_fast_setting(self, table_scenario):
        scenario = table_scenario()
        result = run_focused_ils(scenario, Budget(max_runs=400), seed=1, params=IlsParams(initial_random=2))
        assert result.configurator == "paramils-focused"
        assert result.incumbent["a"] == "2"
        assert result.trajectory[0].incumbent_id == default_configuration(scenario.space).config_id
        assert result.trajectory[-1].incumbent_id == result.incumbent.config_id

    def test_basic_finds_the_fast_setting(self, table_scenario):
        scenario = table_scenario()
        result = run_basic_ils(scenario, Budget(max_runs=600), seed=2, params=IlsParams(n_basic=4, initial_random=2))
        assert result.configurator == "paramils-basic"
        assert result.incumbent["a"] == "2"

    def test_zero_budget_returns_default(self, table_scenario):
        scenario = table_scenario()
        result = run_focused_ils(scenario, Budget(max_runs=0), seed=0)
        assert result.incumbent == default_configuration(scenario.space)
        assert result.runs_used == 0

    def test_same_seed_same_result(self, table_scenario):
        first = run_focused_ils(table_scenario(), Budget(max_runs=150), seed=5)
        second = run_focused_ils(table_scenario(), Budget(max_runs=150), seed=5)
        assert first.incumbent == second.incumbent
        assert first.runs_used == second.runs_used

    def test_writes_ledger(self, table_scenario, tmp_path):
        path = tmp_path / "ledger.csv"
        result = run_focused_ils(table_scenario(), Budget(max_runs=20), seed=0, ledger_path=path)
        assert len(path.read_text().splitlines()) == result.runs_used + 1
