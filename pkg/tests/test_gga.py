import math

import numpy as np
import pytest

from src.core.errors import UnsupportedSpaceError
from src.models.schemas import GgaParams
from src.services.configurators.evaluator import Budget
from src.services.configurators.gga import (
    GGA,
    Gender,
    Genome,
    assign_genders,
    check_space_supported,
    intensification_schedule,
    mutate,
    recombine,
    run_gga,
    select_partner,
)
from src.services.space.operations import default_configuration, sample_uniform, validate
from src.services.scoring import run_cost
from src.services.space.pcs import parse_pcs
from src.services.synthetic.catalog import synthetic_scenario

DEEP_PCS = """
a {0,1} [0]
b {0,1} [0]
c {0,1} [0]
b | a in {1}
c | b in {1}
"""

NUMERIC_PARENT_PCS = """
x [0,10] [5] i
y {0,1} [0]
y | x in {3}
"""


class TestSchedule:
    def test_linear_ramp_then_flat(self):
        params = GgaParams(n_start=4, n_target=50, generation_target=75, generation_max=100)
        assert intensification_schedule(params, 1) == 4
        assert intensification_schedule(params, 38) == 27
        assert intensification_schedule(params, 75) == 50
        assert intensification_schedule(params, 100) == 50

    def test_single_generation_target(self):
        params = GgaParams(n_start=2, n_target=9, generation_target=1, generation_max=5)
        assert intensification_schedule(params, 1) == 9

    def test_n_target_defaults_to_training_set(self):
        params = GgaParams(n_start=4).resolved(3)
        assert params.n_target == 3 and params.n_start == 3


class TestSupport:
    def test_depth_three_rejected(self):
        with pytest.raises(UnsupportedSpaceError):
            check_space_supported(parse_pcs(DEEP_PCS))

    def test_numeric_parent_rejected(self):
        with pytest.raises(UnsupportedSpaceError):
            check_space_supported(parse_pcs(NUMERIC_PARENT_PCS))

    def test_mixed_space_supported(self, mixed_space):
        check_space_supported(mixed_space)


class TestGenetics:
    def test_half_competitive(self):
        genders = assign_genders(7, np.random.default_rng(0))
        assert genders.count(Gender.COMPETITIVE) == 4
        assert genders.count(Gender.NONCOMPETITIVE) == 3

    def test_child_genes_come_from_between_the_parents(self, mixed_space):
        rng = np.random.default_rng(4)
        first = default_configuration(mixed_space)
        second = first.replace(restarts=60, decay=0.6, solver="cdcl", phase="on")
        for _ in range(50):
            child = recombine(Genome(first, Gender.COMPETITIVE), Genome(second, Gender.NONCOMPETITIVE), rng)
            assert 10 <= child["restarts"] <= 60
            assert 0.6 <= child["decay"] <= 0.95
            assert child["phase"] in ("on", "off")
            assert validate(mixed_space, child).ok

    def test_identical_parents_give_the_same_child(self, mixed_space):
        config = default_configuration(mixed_space)
        child = recombine(Genome(config, Gender.COMPETITIVE), Genome(config, Gender.NONCOMPETITIVE), np.random.default_rng(0))
        assert child == config

    def test_children_are_never_forbidden(self, mixed_space):
        rng = np.random.default_rng(11)
        for _ in range(100):
            parents = [Genome(sample_uniform(mixed_space, rng), g) for g in Gender]
            assert not mixed_space.is_forbidden(recombine(*parents, rng))

    def test_mutation_rates(self, mixed_space):
        rng = np.random.default_rng(2)
        config = default_configuration(mixed_space)
        assert mutate(config, 0.0, rng) == config
        mutated = [mutate(config, 1.0, rng) for _ in range(10)]
        assert any(m != config for m in mutated)
        assert all(validate(mixed_space, m).ok for m in mutated)

    def test_partner_is_drawn_from_the_pool(self, discrete_space):
        pool = [Genome(default_configuration(discrete_space).replace(a=v), Gender.NONCOMPETITIVE) for v in ("0", "1")]
        assert select_partner(pool, np.random.default_rng(0)) in pool

    def test_partner_selection_is_uniform(self, mixed_space):
        rng = np.random.default_rng(8)
        pool = [Genome(sample_uniform(mixed_space, rng), Gender.NONCOMPETITIVE) for _ in range(4)]
        draws = 8000
        counts = [0] * len(pool)
        for _ in range(draws):
            counts[next(i for i, g in enumerate(pool) if g is select_partner(pool, rng))] += 1
        expected = draws / len(pool)
        sigma = math.sqrt(draws * 0.25 * 0.75)
        assert all(abs(c - expected) < 3 * sigma for c in counts)


class TestRace:
    def test_winner_and_capped_losers(self, table_scenario):
        scenario = table_scenario({"0": 0.5, "1": 2.0, "2": 3.0})
        gga = GGA(scenario, Budget(), 0, GgaParams(units=2, population_size=4))
        default = default_configuration(scenario.space)
        genomes = [Genome(default.replace(a=v), Gender.COMPETITIVE) for v in ("0", "1", "2")]
        winner, total = gga.race(genomes, 4)
        assert winner["a"] == "0"
        assert total == pytest.approx(2.0)
        slow = default.replace(a="2")
        assert gga.history.n_runs(slow) == 1
        assert gga.history.record(slow, 0).outcome.capped

    def test_ties_go_to_the_first_by_sort_key(self, table_scenario):
        scenario = table_scenario({"0": 1.0, "1": 1.0, "2": 1.0})
        gga = GGA(scenario, Budget(), 0, GgaParams(units=2, population_size=4))
        default = default_configuration(scenario.space)
        genomes = [Genome(default.replace(a=v), Gender.COMPETITIVE) for v in ("2", "1")]
        winner, _ = gga.race(genomes, 2)
        assert winner["a"] == "1"

    def test_capped_race_picks_the_uncapped_winner(self):
        scenario = synthetic_scenario("two_cluster", n_train=8, n_test=2, cluster_mix=(0.5, 0.5))
        metric = scenario.metric
        rng = np.random.default_rng(4)
        for trial in range(20):
            genomes = [Genome(sample_uniform(scenario.space, rng), Gender.COMPETITIVE) for _ in range(6)]
            prefix = int(rng.integers(1, 9))
            capped = GGA(scenario, Budget(), trial, GgaParams(population_size=4))
            winner, total = capped.race(genomes, prefix)

            exact = GGA(scenario, Budget(), trial, GgaParams(population_size=4))
            totals = {
                g.config: sum(run_cost(exact.evaluator.run_slot(g.config, i), metric) for i in range(prefix))
                for g in genomes
            }
            expected = min(totals, key=lambda c: (totals[c], c.sort_key()))
            assert winner == expected
            assert total == pytest.approx(totals[expected])


class TestRun:
    PARAMS = GgaParams(
        units=2, population_size=12, generation_target=4, generation_max=10, n_start=2, mutation_rate=0.3
    )

    def test_finds_the_fast_setting(self, table_scenario):
        result = run_gga(table_scenario(), Budget(), seed=3, params=self.PARAMS)
        assert result.configurator == "gga"
        assert result.incumbent["a"] == "2"
        assert result.trajectory

    def test_budget_exhaustion_still_returns_a_finalist(self, table_scenario):
        scenario = table_scenario()
        result = run_gga(scenario, Budget(max_runs=10), seed=3, params=self.PARAMS)
        assert result.runs_used <= 10
        assert validate(scenario.space, result.incumbent).ok

    def test_zero_budget_returns_default(self, table_scenario):
        scenario = table_scenario()
        result = run_gga(scenario, Budget(max_runs=0), seed=0, params=self.PARAMS)
        assert result.incumbent == default_configuration(scenario.space)

    def test_reproducible(self, table_scenario):
        first = run_gga(table_scenario(), Budget(max_runs=60), seed=8, params=self.PARAMS)
        second = run_gga(table_scenario(), Budget(max_runs=60), seed=8, params=self.PARAMS)
        assert first.incumbent == second.incumbent
        assert first.runs_used == second.runs_used

    def test_unsupported_space_raises(self, table_scenario):
        scenario = table_scenario().with_space(parse_pcs(DEEP_PCS))
        with pytest.raises(UnsupportedSpaceError):
            GGA(scenario, Budget(), 0)
