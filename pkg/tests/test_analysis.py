import math

import numpy as np
import pandas as pd
import pytest

from src.core.errors import AnalysisError, UndefinedSpeedupError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.services.analysis import (
    SCATTER_COLUMNS,
    approach_slowdowns,
    emit_scatter,
    geometric_mean_slowdown,
    sample_correlation_study,
    spearman,
    speedup_factor,
    speedup_record,
    top_fraction_size,
)
from src.services.scenario.loader import load_scenario
from src.services.synthetic.catalog import synthetic_scenario, write_bundle

PAR10 = CostMetric(k=10, kappa=300.0)


def solved(runtime):
    return RunOutcome(RunStatus.SUCCESS, runtime)


def timeout(runtime=300.0):
    return RunOutcome(RunStatus.TIMEOUT, runtime)


class TestSpeedup:
    def test_timeouts_turned_into_solves(self):
        default = {"i1": timeout(), "i2": solved(1.0)}
        configured = {"i1": solved(1.0), "i2": solved(1.0)}
        # (3000 + 1) / 2 over (1 + 1) / 2
        assert speedup_factor(default, configured, PAR10) == pytest.approx(1500.5)

    def test_instances_nobody_solved_are_ignored(self):
        default = {"i1": solved(4.0), "i2": timeout()}
        configured = {"i1": solved(2.0), "i2": timeout()}
        assert speedup_factor(default, configured, PAR10) == pytest.approx(2.0)

    def test_par1(self):
        default = {"i1": timeout(), "i2": solved(1.0)}
        configured = {"i1": solved(1.0), "i2": solved(1.0)}
        assert speedup_factor(default, configured, CostMetric(k=1, kappa=300.0)) == pytest.approx(150.5)

    def test_undefined_when_nothing_solved(self):
        with pytest.raises(UndefinedSpeedupError):
            speedup_factor({"i": timeout()}, {"i": timeout()}, PAR10)

    def test_record_marks_undefined(self):
        record = speedup_record("sat", 12, {"i": timeout()}, {"i": timeout()}, PAR10)
        assert not record.defined
        assert record.num_params == 12
        assert record.metric_k == 10

    def test_mismatched_instances(self):
        with pytest.raises(AnalysisError):
            speedup_factor({"i": solved(1.0)}, {"j": solved(1.0)}, PAR10)


class TestSlowdown:
    def test_geometric_mean(self):
        assert geometric_mean_slowdown([(2.0, 1.0), (1.0, 2.0)]) == pytest.approx(1.0)
        assert geometric_mean_slowdown([(4.0, 1.0)]) == pytest.approx(4.0)

    def test_rejects_empty_and_non_positive(self):
        with pytest.raises(AnalysisError):
            geometric_mean_slowdown([])
        with pytest.raises(AnalysisError):
            geometric_mean_slowdown([(0.0, 1.0)])

    def test_approach_slowdowns_from_report_frames(self):
        first = pd.DataFrame(
            {
                "approach": ["default", "smac", "smac", "gga"],
                "train_cost": [8.0, 2.0, 3.0, 4.0],
                "selected": [False, True, False, False],
            }
        )
        second = pd.DataFrame(
            {
                "approach": ["default", "smac", "gga"],
                "train_cost": [8.0, 2.0, 1.0],
                "selected": [False, False, True],
            }
        )
        slowdowns = approach_slowdowns([first, second])
        assert slowdowns["smac"] == pytest.approx(math.sqrt(2.0))
        assert slowdowns["gga"] == pytest.approx(math.sqrt(2.0))
        assert "default" not in slowdowns

    def test_failed_approaches_are_skipped(self):
        frame = pd.DataFrame(
            {
                "approach": ["default", "smac", "gga"],
                "train_cost": [8.0, 2.0, np.nan],
                "selected": [False, True, False],
            }
        )
        assert approach_slowdowns([frame]) == {"smac": pytest.approx(1.0)}


class TestCorrelation:
    def test_spearman(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    @pytest.mark.parametrize("xs, ys", [([1], [1]), ([1, 2], [1, 2, 3]), ([1, 1, 1], [1, 2, 3])])
    def test_spearman_rejects(self, xs, ys):
        with pytest.raises(AnalysisError):
            spearman(xs, ys)

    @pytest.mark.parametrize("n, expected", [(5, 2), (10, 2), (15, 3), (100, 20)])
    def test_top_fraction_size(self, n, expected):
        assert top_fraction_size(n) == expected

    def test_study_on_an_instance_independent_surface(self, tmp_path):
        scenario = synthetic_scenario("valley", n_train=3, n_test=3)
        study = sample_correlation_study(scenario, 20, np.random.default_rng(0), tmp_path / "corr.csv")
        # train and test agree exactly when runtimes ignore the instance
        assert study.spearman_all == pytest.approx(1.0)
        assert study.top_count == 4
        assert len(pd.read_csv(tmp_path / "corr.csv")) == 20

    def test_skewed_cluster_mixes_lose_correlation_at_the_top(self, tmp_path):
        # train is mostly cluster A, test mostly cluster B; the clusters share q but not p
        paths = write_bundle(tmp_path / "bundle", "two_cluster", n_train=50, n_test=50, cluster_mix=(0.9, 0.1))
        scenario = load_scenario(paths["scenario"])
        study = sample_correlation_study(scenario, 100, np.random.default_rng(5))
        assert study.top_count == 20
        assert study.spearman_all > 0.7
        assert study.spearman_top < study.spearman_all

    def test_constant_costs_give_nan(self, table_scenario):
        scenario = table_scenario(runtimes={"0": 1.0, "1": 1.0, "2": 1.0})
        study = sample_correlation_study(scenario, 5, np.random.default_rng(0))
        assert math.isnan(study.spearman_all)
        assert math.isnan(study.spearman_top)

    def test_study_needs_five_samples(self):
        with pytest.raises(AnalysisError):
            sample_correlation_study(synthetic_scenario("valley", n_train=2, n_test=2), 4)


class TestScatter:
    def test_failures_at_the_penalty(self, tmp_path):
        path = tmp_path / "scatter.csv"
        emit_scatter({"i": timeout()}, {"i": solved(2.0)}, path, PAR10)
        frame = pd.read_csv(path)
        assert list(frame.columns) == SCATTER_COLUMNS
        assert frame.loc[0, "default_cost"] == 3000.0
        assert frame.loc[0, "configured_cost"] == 2.0
        assert frame.loc[0, "default_status"] == "TIMEOUT"
