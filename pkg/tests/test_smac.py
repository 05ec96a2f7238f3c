import json
import math

import numpy as np
import pytest

from src.core.errors import InsufficientDataError
from src.models.runs import RunOutcome, RunStatus
from src.models.scenario import InstanceFeatures
from src.models.schemas import SmacParams
from src.services.configurators.evaluator import Budget
from src.services.configurators.smac import (
    SMAC,
    ConfigurationEncoder,
    dump_trees,
    expected_improvement,
    fit_forest,
    marginal_predict,
    run_smac,
    select_challengers,
)
from src.services.configurators.smac.acquisition import local_neighbors
from src.services.configurators.smac.encoder import scale, unscale
from src.services.configurators.smac.forest import log_cost
from src.services.runhistory import RunHistory
from src.services.space.operations import default_configuration, validate
from src.services.synthetic.surfaces import score_on

SMALL = SmacParams(num_trees=10, random_samples=50, local_search_starts=3, challengers=4, min_samples_leaf=1)


@pytest.fixture
def fitted(table_scenario):
    """A model trained on every value of `a`, four runs each."""
    scenario = table_scenario()
    history = RunHistory(scenario.train.ids, scenario.metric, deterministic=True)
    default = default_configuration(scenario.space)
    for value, runtime in (("0", 3.0), ("1", 2.0), ("2", 0.5)):
        for index in range(4):
            history.add(default.replace(a=value), index, RunOutcome(RunStatus.SUCCESS, runtime), 10.0)
    encoder = ConfigurationEncoder(scenario.space)
    return scenario, fit_forest(history, encoder, SMALL, seed=0)


class TestExpectedImprovement:
    def test_at_the_incumbent_with_unit_variance(self):
        assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.3989, abs=1e-4)

    def test_zero_variance(self):
        assert expected_improvement(-1.0, 0.0, 0.0) == pytest.approx(1.0)
        assert expected_improvement(1.0, 0.0, 0.0) == 0.0

    def test_vectorised_and_non_negative(self):
        ei = expected_improvement(np.array([-2.0, 0.0, 5.0]), np.array([0.5, 0.5, 0.5]), 0.0)
        assert ei.shape == (3,)
        assert (ei >= 0).all()
        assert ei[0] > ei[1] > ei[2]


class TestEncoder:
    def test_mixed_space_encoding(self, mixed_space):
        encoder = ConfigurationEncoder(mixed_space)
        assert encoder.dimension == 6
        assert encoder.columns[-1] == "phase:active"
        vector = encoder.encode_config(default_configuration(mixed_space))
        assert vector[0] == 1.0
        assert vector[1] == pytest.approx(9 / 99)
        assert vector[3] == pytest.approx(1 / 3)
        assert vector[-1] == 1.0

    def test_inactive_parameters_encode_their_default(self, mixed_space):
        encoder = ConfigurationEncoder(mixed_space)
        config = default_configuration(mixed_space).replace(solver="dpll")
        vector = encoder.encode_config(config)
        assert vector[4] == 1.0  # 'off' is the second choice
        assert vector[-1] == 0.0

    def test_features_appended_and_missing_rows_zeroed(self, discrete_space):
        features = InstanceFeatures(feature_names=("f",), rows={"i1": (7.0,)})
        encoder = ConfigurationEncoder(discrete_space, features)
        config = default_configuration(discrete_space)
        assert encoder.encode(config, "i1")[-1] == 7.0
        assert encoder.encode(config, "unknown")[-1] == 0.0

    def test_scale_round_trip(self, mixed_space):
        for name, value in (("restarts", 37), ("decay", 0.8), ("step", 0.1)):
            spec = mixed_space[name]
            assert unscale(spec, scale(spec, value)) == pytest.approx(value)
        assert unscale(mixed_space["restarts"], 2.0) == 100


class TestForest:
    def test_needs_two_configurations(self, table_scenario):
        scenario = table_scenario()
        history = RunHistory(scenario.train.ids, scenario.metric, deterministic=True)
        history.add(default_configuration(scenario.space), 0, RunOutcome(RunStatus.SUCCESS, 1.0), 10.0)
        with pytest.raises(InsufficientDataError):
            fit_forest(history, ConfigurationEncoder(scenario.space))

    def test_predictions_order_configurations(self, fitted):
        scenario, model = fitted
        default = default_configuration(scenario.space)
        fast = marginal_predict(model, default.replace(a="2"))
        slow = marginal_predict(model, default)
        assert fast < slow
        assert fast == pytest.approx(log_cost(0.5), abs=0.3)
        mean, variance = model.predict(default)
        assert variance >= 0

    def test_log_cost_floor(self):
        assert log_cost(0.0) == pytest.approx(math.log10(0.01))

    def test_dump_trees(self, fitted, tmp_path):
        _, model = fitted
        path = tmp_path / "model" / "trees.json"
        dump_trees(model, path)
        payload = json.loads(path.read_text())
        assert len(payload["trees"]) == 10
        assert payload["observations"] == 12


class TestChallengers:
    def test_random_without_a_model(self, table_scenario):
        scenario = table_scenario()
        default = default_configuration(scenario.space)
        challengers = select_challengers(None, scenario.space, default, np.random.default_rng(0), 5)
        assert len(challengers) == 5

    def test_guided_challengers_lead(self, fitted):
        scenario, model = fitted
        default = default_configuration(scenario.space)
        challengers = select_challengers(
            model, scenario.space, default, np.random.default_rng(0), 4, log_cost(3.0), SMALL
        )
        assert len(challengers) == 4
        assert challengers[0] != default
        assert challengers[0]["a"] == "2"

    def test_local_neighbours_are_valid(self, mixed_space):
        rng = np.random.default_rng(1)
        config = default_configuration(mixed_space)
        result = local_neighbors(mixed_space, config, rng, 0.2, 4)
        assert result
        assert all(validate(mixed_space, n).ok and n != config for n in result)


class TestSMAC:
    def test_improves_on_the_default(self, valley_scenario):
        result = run_smac(valley_scenario, Budget(max_runs=150), seed=0, params=SMALL)
        surface = valley_scenario.target.surface
        metric = valley_scenario.metric
        default = default_configuration(valley_scenario.space)
        train = valley_scenario.train.ids
        assert result.configurator == "smac"
        assert score_on(surface, result.incumbent, train, metric).mean_cost < score_on(surface, default, train, metric).mean_cost

    def test_intensify_rejects_a_slower_challenger(self, table_scenario):
        scenario = table_scenario()
        smac = SMAC(scenario, Budget(), 0, SMALL)
        default = default_configuration(scenario.space)
        smac.evaluator.run_slot(default.replace(a="2"), 0)
        smac.incumbent = default.replace(a="2")
        assert not smac.intensify(default)
        assert smac.intensify(default.replace(a="2")) is False

    def test_intensify_promotes_a_faster_challenger(self, table_scenario):
        scenario = table_scenario()
        smac = SMAC(scenario, Budget(), 0, SMALL)
        default = default_configuration(scenario.space)
        smac.evaluator.extend(default, 3)
        smac.incumbent = default
        assert smac.intensify(default.replace(a="2"))
        assert smac.incumbent["a"] == "2"
        assert smac.history.n_runs(smac.incumbent) == 3

    def test_model_dump_written(self, table_scenario, tmp_path):
        path = tmp_path / "trees.json"
        run_smac(table_scenario(), Budget(max_runs=30), seed=1, params=SMALL, model_dump_path=path)
        assert path.exists()

    def test_zero_budget_returns_default(self, table_scenario):
        scenario = table_scenario()
        result = run_smac(scenario, Budget(max_runs=0), seed=0)
        assert result.incumbent == default_configuration(scenario.space)
