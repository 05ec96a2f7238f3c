import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import pytest

from src.models.runs import RunOutcome, RunStatus
from src.models.scenario import InstanceSet, Scenario
from src.services.space.pcs import parse_pcs
from src.services.synthetic.catalog import synthetic_scenario

MIXED_PCS = """
# a small mixed space with one condition and one forbidden pair
solver {dpll,cdcl} [cdcl]
restarts [1,100] [10] i
decay [0.5,1.0] [0.95]
step [0.001,1.0] [0.01] l
phase {on,off} [off]
phase | solver in {cdcl}
{solver=dpll, restarts=1}
"""

DISCRETE_PCS = """
a {0,1,2} [0]
b {x,y} [x]
c {p,q,r} [p]
c | b in {y}
"""


class TableTarget:
    """In-process target whose runtime is a lookup on one parameter's value."""

    def __init__(self, parameter: str, runtimes: dict, status: RunStatus = RunStatus.SUCCESS):
        self.parameter = parameter
        self.runtimes = runtimes
        self.status = status
        self.calls = []

    def evaluate(self, config, instance_id, seed, cutoff):
        self.calls.append((config[self.parameter], instance_id, seed, cutoff))
        runtime = self.runtimes[config[self.parameter]]
        if runtime > cutoff:
            return RunOutcome(RunStatus.TIMEOUT, cutoff)
        return RunOutcome(self.status, runtime)


@pytest.fixture
def mixed_space():
    return parse_pcs(MIXED_PCS)


@pytest.fixture
def discrete_space():
    return parse_pcs(DISCRETE_PCS)


@pytest.fixture
def table_scenario(discrete_space):
    """Deterministic in-process scenario where only parameter `a` matters (a=2 is fastest)."""

    def build(runtimes=None, cutoff=10.0, n_train=4, n_test=3):
        target = TableTarget("a", runtimes or {"0": 3.0, "1": 2.0, "2": 0.5})
        return Scenario(
            target_command="table",
            space=discrete_space,
            train=InstanceSet.of([f"train_{i}" for i in range(n_train)]),
            test=InstanceSet.of([f"test_{i}" for i in range(n_test)]),
            cutoff_seconds=cutoff,
            par_k=10,
            cores=1,
            deterministic=True,
            target=target,
        )

    return build


@pytest.fixture
def valley_scenario():
    return synthetic_scenario("valley", n_train=8, n_test=8, cutoff=2.0)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path
