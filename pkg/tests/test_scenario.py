import pytest

from src.core.errors import ScenarioError
from src.models.runs import ExpectedStatus
from src.services.scenario.loader import load_features, load_instances, load_scenario, parse_scenario
from src.services.synthetic.catalog import write_bundle

from tests.conftest import DISCRETE_PCS, write_text


@pytest.fixture
def scenario_dir(tmp_path):
    """A process-target scenario with every referenced file in place."""
    write_text(tmp_path / "params.pcs", DISCRETE_PCS)
    write_text(tmp_path / "train.txt", "i1 SAT\ni2 UNSAT\n# comment\ni3\n")
    write_text(tmp_path / "test.txt", "t1\nt2\nt3\nt4\n")
    write_text(tmp_path / "features.csv", "instance,f1,f2\ni1,1.0,2.0\ni2,3.0,4.0\ni3,5.0,6.0\nt1,0,0\n")
    return tmp_path


def _scenario_text(**overrides):
    pairs = {
        "algo": "python wrapper.py",
        "paramfile": "params.pcs",
        "instance_file": "train.txt",
        "test_instance_file": "test.txt",
        "cutoff_time": "5",
    }
    pairs.update(overrides)
    return "\n".join(f"{k} = {v}" for k, v in pairs.items() if v is not None) + "\n"


class TestInstances:
    def test_statuses_and_comments(self, scenario_dir):
        instances = load_instances(scenario_dir / "train.txt")
        assert instances.ids == ("i1", "i2", "i3")
        assert instances.expected_status("i1") is ExpectedStatus.SAT
        assert instances.expected_status("i3") is ExpectedStatus.UNKNOWN

    def test_duplicate_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="duplicate"):
            load_instances(write_text(tmp_path / "dup.txt", "a\na\n"))

    def test_bad_status_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="bad status"):
            load_instances(write_text(tmp_path / "bad.txt", "a MAYBE\n"))

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_instances(write_text(tmp_path / "empty.txt", "# nothing\n"))


class TestFeatures:
    def test_non_training_rows_ignored(self, scenario_dir):
        features = load_features(scenario_dir / "features.csv", load_instances(scenario_dir / "train.txt"))
        assert features.feature_names == ("f1", "f2")
        assert set(features.rows) == {"i1", "i2", "i3"}
        assert features.covers(["i1", "i2", "i3"])
        assert list(features.vector("i2")) == [3.0, 4.0]

    def test_non_numeric_rejected(self, scenario_dir):
        write_text(scenario_dir / "bad.csv", "instance,f1\ni1,abc\n")
        with pytest.raises(ScenarioError, match="Non-numeric"):
            load_features(scenario_dir / "bad.csv", load_instances(scenario_dir / "train.txt"))

    def test_missing_instance_column_rejected(self, scenario_dir):
        write_text(scenario_dir / "bad.csv", "name,f1\ni1,1\n")
        with pytest.raises(ScenarioError, match="instance"):
            load_features(scenario_dir / "bad.csv", load_instances(scenario_dir / "train.txt"))


class TestParseScenario:
    def test_defaults_and_relative_paths(self, scenario_dir):
        scenario = parse_scenario(_scenario_text(feature_file="features.csv"), base_dir=scenario_dir)
        assert scenario.cutoff_seconds == 5.0
        assert scenario.par_k == 10
        assert not scenario.deterministic
        assert not scenario.in_process
        assert scenario.execdir == scenario_dir
        assert scenario.features is not None
        assert scenario.metric.penalty == 50.0

    def test_optional_keys(self, scenario_dir):
        text = _scenario_text(par_k="1", deterministic="true", cores="2", memory_limit_mb="512", instance_info="info")
        scenario = parse_scenario(text, base_dir=scenario_dir)
        assert scenario.par_k == 1
        assert scenario.deterministic
        assert scenario.cores == 2
        assert scenario.memory_limit_mb == 512
        assert scenario.instance_info == "info"

    def test_test_sample_is_reproducible(self, scenario_dir):
        first = parse_scenario(_scenario_text(test_sample="2", seed="4"), base_dir=scenario_dir)
        second = parse_scenario(_scenario_text(test_sample="2", seed="4"), base_dir=scenario_dir)
        assert len(first.test) == 2
        assert first.test.ids == second.test.ids

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"cutoff_time": None}, "missing mandatory"),
            ({"bogus": "1"}, "unknown scenario key"),
            ({"cutoff_time": "fast"}, "expects a number"),
            ({"cutoff_time": "0"}, "Invalid scenario"),
            ({"cutoff_time": "inf"}, "Invalid scenario"),
            ({"deterministic": "maybe"}, "true/false"),
            ({"paramfile": "missing.pcs"}, "Cannot read"),
            ({"test_instance_file": "train.txt"}, "overlap"),
        ],
    )
    def test_errors(self, scenario_dir, overrides, message):
        with pytest.raises(ScenarioError, match=message):
            parse_scenario(_scenario_text(**overrides), base_dir=scenario_dir)

    def test_overlap_detected_before_test_sampling(self, scenario_dir):
        write_text(scenario_dir / "train.txt", "shared\nt1\n")
        write_text(scenario_dir / "test.txt", "shared\n" + "".join(f"x{i}\n" for i in range(40)))
        with pytest.raises(ScenarioError, match="overlap.*shared"):
            parse_scenario(_scenario_text(test_sample="1", seed="0"), base_dir=scenario_dir)

    def test_bad_pcs_wrapped(self, scenario_dir):
        write_text(scenario_dir / "params.pcs", "a {0,1} [7]\n")
        with pytest.raises(ScenarioError, match="Invalid parameter file"):
            parse_scenario(_scenario_text(), base_dir=scenario_dir)


class TestLoadScenario:
    def test_synthetic_bundle_loads_in_process(self, tmp_path):
        paths = write_bundle(tmp_path / "bundle", "valley", n_train=4, n_test=3, cutoff=2.0)
        scenario = load_scenario(paths["scenario"])
        assert scenario.in_process
        assert len(scenario.train) == 4
        assert len(scenario.test) == 3
        assert scenario.deterministic

    def test_wrapper_bundle_is_a_process_target(self, tmp_path):
        paths = write_bundle(tmp_path / "bundle", "valley", n_train=4, n_test=3)
        scenario = load_scenario(paths["wrapper_scenario"])
        assert not scenario.in_process
        assert "src.services.synthetic.wrapper" in scenario.target_command
