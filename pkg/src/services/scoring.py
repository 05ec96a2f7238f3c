import math
from collections import defaultdict
from collections.abc import Mapping, Sequence

import numpy as np

from src.core.errors import ScoringError
from src.models.metrics import AggregateScore, CostMetric, RankingEntry
from src.models.runs import RunOutcome
from src.services.execution.runner import penalized_cost


def run_cost(outcome: RunOutcome, metric: CostMetric) -> float:
    return penalized_cost(outcome, metric.kappa, metric.k)


def aggregate(outcomes: Sequence[RunOutcome], metric: CostMetric) -> AggregateScore:
    """Mean PAR-k cost over one outcome per instance."""
    if not outcomes:
        raise ScoringError("Cannot aggregate an empty outcome list.")
    costs = [run_cost(o, metric) for o in outcomes]
    return AggregateScore(
        mean_cost=min(math.fsum(costs) / len(costs), metric.penalty),
        solved_count=sum(o.solved for o in outcomes),
        attempted_count=len(outcomes),
        lower_bound=any(o.capped for o in outcomes),
    )


def aggregate_by_instance(runs: Sequence[tuple[str, RunOutcome]], metric: CostMetric) -> AggregateScore:
    """
    Aggregates multi-seed runs: costs are averaged per instance first, so every instance
    weighs the same. An instance counts as solved only if all of its runs solved it.
    """
    if not runs:
        raise ScoringError("Cannot aggregate an empty outcome list.")
    per_instance: dict[str, list[RunOutcome]] = defaultdict(list)
    for instance_id, outcome in runs:
        per_instance[instance_id].append(outcome)
    means = [math.fsum(run_cost(o, metric) for o in group) / len(group) for group in per_instance.values()]
    return AggregateScore(
        mean_cost=min(math.fsum(means) / len(means), metric.penalty),
        solved_count=sum(all(o.solved for o in group) for group in per_instance.values()),
        attempted_count=len(per_instance),
        lower_bound=any(o.capped for _, o in runs),
    )


def ranking_entry(label: str, outcomes: Mapping[str, RunOutcome], metric: CostMetric) -> RankingEntry:
    score = aggregate(list(outcomes.values()), metric)
    solved_runtimes = [o.runtime for o in outcomes.values() if o.solved]
    return RankingEntry(
        label=label,
        solved_count=score.solved_count,
        mean_runtime_solved=float(np.mean(solved_runtimes)) if solved_runtimes else math.inf,
        par_k=score.mean_cost,
        attempted_count=score.attempted_count,
    )


def rank(entries: Sequence[tuple[str, Mapping[str, RunOutcome]]], metric: CostMetric) -> list[RankingEntry]:
    """
    Competition order: most instances solved first, then lowest mean runtime over the
    instances an entry solved, then label.
    """
    if not entries:
        return []
    universe = set(entries[0][1])
    for label, outcomes in entries:
        if set(outcomes) != universe:
            raise ScoringError(f"Entry '{label}' was evaluated on a different instance set.")
    ranked = [ranking_entry(label, outcomes, metric) for label, outcomes in entries]
    return sorted(ranked, key=lambda e: (-e.solved_count, e.mean_runtime_solved, e.label))
