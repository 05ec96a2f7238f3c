"""
Full-set evaluation of single configurations: training-set validation of incumbents
and test-set evaluation. Exact ledger runs on the same (instance, seed) are reused.
"""
import hashlib
import logging
from typing import Iterable, Sequence

from src.models.metrics import CostMetric
from src.models.runs import RunOutcome
from src.models.scenario import Scenario
from src.models.schemas import InstanceResult
from src.models.space import Configuration
from src.services.execution.pool import RunnerPool
from src.services.execution.runner import make_spec
from src.services.runhistory import RunHistory
from src.services.scoring import run_cost


def derive_seed(*parts) -> int:
    """Stable 31-bit seed from any printable parts; independent of hash randomisation."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF


def evaluation_seed(campaign_seed: int, instance_id: str, deterministic: bool) -> int:
    return 0 if deterministic else derive_seed(campaign_seed, "evaluation", instance_id)


def _reusable(config: Configuration, histories: Iterable[RunHistory]) -> dict[tuple[str, int], RunOutcome]:
    known = {}
    for history in histories:
        for record in history.current(config):
            if not record.outcome.capped:
                known[(record.instance_id, record.seed)] = record.outcome
    return known


def evaluate_on(
    scenario: Scenario,
    config: Configuration,
    instances: Sequence[str],
    campaign_seed: int = 0,
    pool: RunnerPool | None = None,
    reuse: Iterable[RunHistory] = (),
) -> dict[str, RunOutcome]:
    """One uncapped run per instance at the scenario cutoff, keyed by instance id."""
    known = _reusable(config, reuse)
    outcomes: dict[str, RunOutcome] = {}
    specs = []
    for instance_id in instances:
        seed = evaluation_seed(campaign_seed, instance_id, scenario.deterministic)
        if (instance_id, seed) in known:
            outcomes[instance_id] = known[(instance_id, seed)]
        else:
            specs.append(make_spec(scenario, config, instance_id, seed))

    if specs:
        owned = pool is None
        pool = pool or RunnerPool(scenario, width=1 if scenario.in_process else scenario.cores)
        try:
            for done in pool.as_completed([pool.submit(spec) for spec in specs]):
                outcomes[done.spec.instance_id] = done.result()
        finally:
            if owned:
                pool.shutdown()
    logging.debug(
        f"Evaluated {config.config_id} on {len(instances)} instances ({len(instances) - len(specs)} reused)."
    )
    return {instance_id: outcomes[instance_id] for instance_id in instances}


def instance_results(outcomes: dict[str, RunOutcome], metric: CostMetric) -> list[InstanceResult]:
    return [
        InstanceResult(instance=i, status=o.status.value, runtime=o.runtime, cost=run_cost(o, metric))
        for i, o in outcomes.items()
    ]
