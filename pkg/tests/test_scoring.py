import math

import pytest

from src.core.errors import ScoringError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.services.scoring import aggregate, aggregate_by_instance, rank, run_cost

PAR10 = CostMetric(k=10, kappa=300.0)
PAR1 = CostMetric(k=1, kappa=300.0)


def _solved(runtime):
    return RunOutcome(RunStatus.SAT, runtime)


def _timeout(runtime=300.0, capped=False):
    return RunOutcome(RunStatus.TIMEOUT, runtime, capped=capped)


class TestRunCost:
    def test_timeout_penalties(self):
        assert run_cost(_timeout(), PAR10) == 3000.0
        assert run_cost(_timeout(), PAR1) == 300.0

    @pytest.mark.parametrize("status", [RunStatus.CRASHED, RunStatus.MEMOUT, RunStatus.WRONG_ANSWER])
    def test_failures_cost_the_penalty(self, status):
        assert run_cost(RunOutcome(status, 0.2), PAR10) == 3000.0


class TestAggregate:
    def test_mean_and_counts(self):
        score = aggregate([_solved(10.0), _solved(20.0), _timeout()], PAR10)
        assert score.mean_cost == pytest.approx((10 + 20 + 3000) / 3)
        assert score.solved_count == 2
        assert score.timeout_count == 1
        assert not score.lower_bound

    def test_capped_run_flags_lower_bound(self):
        assert aggregate([_solved(1.0), _timeout(5.0, capped=True)], PAR10).lower_bound

    def test_never_exceeds_penalty(self):
        assert aggregate([_timeout()] * 4, PAR10).mean_cost == 3000.0

    def test_empty_raises(self):
        with pytest.raises(ScoringError):
            aggregate([], PAR10)

    def test_by_instance_averages_seeds_first(self):
        runs = [("a", _solved(2.0)), ("a", _solved(4.0)), ("b", _solved(10.0))]
        score = aggregate_by_instance(runs, PAR10)
        assert score.mean_cost == pytest.approx((3.0 + 10.0) / 2)
        assert score.attempted_count == 2

    def test_by_instance_solved_only_if_every_run_solved(self):
        runs = [("a", _solved(2.0)), ("a", _timeout()), ("b", _solved(1.0))]
        assert aggregate_by_instance(runs, PAR10).solved_count == 1


class TestRank:
    def test_solved_count_then_runtime_then_label(self):
        entries = [
            ("slow", {"i1": _solved(50.0), "i2": _solved(60.0)}),
            ("fast", {"i1": _solved(1.0), "i2": _solved(2.0)}),
            ("partial", {"i1": _solved(0.1), "i2": _timeout()}),
            ("also-fast", {"i1": _solved(2.0), "i2": _solved(1.0)}),
        ]
        ranking = rank(entries, PAR10)
        assert [e.label for e in ranking] == ["also-fast", "fast", "slow", "partial"]
        assert ranking[-1].mean_runtime_solved == pytest.approx(0.1)

    def test_nothing_solved_ranks_last(self):
        entries = [("none", {"i1": _timeout()}), ("one", {"i1": _solved(299.0)})]
        ranking = rank(entries, PAR10)
        assert ranking[0].label == "one"
        assert math.isinf(ranking[1].mean_runtime_solved)

    def test_mismatched_instance_sets_rejected(self):
        with pytest.raises(ScoringError):
            rank([("a", {"i1": _solved(1.0)}), ("b", {"i2": _solved(1.0)})], PAR10)
