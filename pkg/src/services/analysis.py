"""
Post-hoc statistics over campaign results: speedups of configured over default
solvers, slowdowns of individual approaches against the selected result, and the
train/test rank correlation of randomly sampled configurations.
"""
import logging
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy import stats

from src.core.errors import AnalysisError, UndefinedSpeedupError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome
from src.models.scenario import Scenario
from src.models.schemas import SpeedupRecord
from src.services.evaluation import evaluate_on
from src.services.scoring import aggregate, run_cost
from src.services.space.operations import sample_uniform

SCATTER_COLUMNS = ["instance", "default_cost", "configured_cost", "default_status", "configured_status"]


def _aligned(default: Mapping[str, RunOutcome], configured: Mapping[str, RunOutcome]) -> list[str]:
    if set(default) != set(configured):
        raise AnalysisError("Default and configured outcomes cover different instances.")
    return list(default)


def speedup_factor(
    default_outcomes: Mapping[str, RunOutcome], configured_outcomes: Mapping[str, RunOutcome], metric: CostMetric
) -> float:
    """
    PAR-k of the default over PAR-k of the configured solver, on the instances at least
    one of the two solved.
    """
    instances = [
        i for i in _aligned(default_outcomes, configured_outcomes)
        if default_outcomes[i].solved or configured_outcomes[i].solved
    ]
    if not instances:
        raise UndefinedSpeedupError("Neither the default nor the configured solver solved any instance.")
    default_cost = aggregate([default_outcomes[i] for i in instances], metric).mean_cost
    configured_cost = aggregate([configured_outcomes[i] for i in instances], metric).mean_cost
    if configured_cost <= 0:
        raise UndefinedSpeedupError("The configured solver has zero cost on the solved instances.")
    return default_cost / configured_cost


def speedup_record(
    label: str,
    num_params: int,
    default_outcomes: Mapping[str, RunOutcome],
    configured_outcomes: Mapping[str, RunOutcome],
    metric: CostMetric,
) -> SpeedupRecord:
    try:
        factor = speedup_factor(default_outcomes, configured_outcomes, metric)
    except UndefinedSpeedupError as e:
        logging.warning(f"Speedup for {label} is undefined: {e}")
        factor = None
    return SpeedupRecord(label=label, num_params=num_params, metric_k=metric.k, speedup_factor=factor)


def geometric_mean_slowdown(per_scenario: Sequence[tuple[float, float]]) -> float:
    """exp(mean(ln(approach_cost / selected_cost))) over scenarios."""
    if not per_scenario:
        raise AnalysisError("No scenarios to average over.")
    logs = []
    for approach_cost, selected_cost in per_scenario:
        if approach_cost <= 0 or selected_cost <= 0:
            raise AnalysisError(f"Slowdown needs positive costs, got {approach_cost} and {selected_cost}.")
        logs.append(math.log(approach_cost / selected_cost))
    return math.exp(math.fsum(logs) / len(logs))


def approach_slowdowns(report_frames: Sequence[pd.DataFrame]) -> dict[str, float]:
    """
    Per approach, the geometric mean over campaigns of its best validated training cost
    divided by the selected incumbent's. Expects the frames written as report.csv.
    """
    pairs: dict[str, list[tuple[float, float]]] = {}
    for frame in report_frames:
        chosen = frame[frame["selected"].astype(bool)]
        if chosen.empty:
            continue
        selected_cost = float(chosen["train_cost"].iloc[0])
        runs = frame[(frame["approach"] != "default") & frame["train_cost"].notna()]
        for approach, group in runs.groupby("approach"):
            pairs.setdefault(approach, []).append((float(group["train_cost"].min()), selected_cost))
    return {approach: geometric_mean_slowdown(values) for approach, values in sorted(pairs.items())}


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation with ties averaged."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 2:
        raise AnalysisError("Spearman correlation needs two equally long vectors of at least 2 values.")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise AnalysisError("Spearman correlation is undefined for a constant vector.")
    return float(stats.spearmanr(xs, ys)[0])


class CorrelationStudy(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: list[dict]
    spearman_all: float
    spearman_top: float
    top_count: int


def _spearman_or_nan(frame: pd.DataFrame) -> float:
    try:
        return spearman(frame["train_cost"], frame["test_cost"])
    except AnalysisError as e:
        logging.warning(f"Rank correlation undefined: {e}")
        return math.nan


def top_fraction_size(n: int) -> int:
    return max(2, int(math.floor(0.2 * n)))


def sample_correlation_study(
    scenario: Scenario, n: int = 100, rng: np.random.Generator | None = None, out_path: Path | None = None
) -> CorrelationStudy:
    """
    Scores n uniformly sampled configurations on the full training and test sets and
    reports the rank correlation of the two, over all samples and over the best 20% by
    training cost.
    """
    if n < 5:
        raise AnalysisError(f"A correlation study needs at least 5 configurations, got {n}.")
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    metric = scenario.metric
    rows = []
    for _ in range(n):
        config = sample_uniform(scenario.space, rng)
        train = aggregate(list(evaluate_on(scenario, config, scenario.train.ids, scenario.seed).values()), metric)
        test = aggregate(list(evaluate_on(scenario, config, scenario.test.ids, scenario.seed).values()), metric)
        rows.append({"config_id": config.config_id, "train_cost": train.mean_cost, "test_cost": test.mean_cost})

    frame = pd.DataFrame(rows, columns=["config_id", "train_cost", "test_cost"])
    top_count = top_fraction_size(n)
    top = frame.sort_values(["train_cost", "config_id"], kind="stable").head(top_count)
    study = CorrelationStudy(
        rows=rows,
        spearman_all=_spearman_or_nan(frame),
        spearman_top=_spearman_or_nan(top),
        top_count=top_count,
    )
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_path, index=False)
    logging.info(f"Sampled {n} configurations: Spearman {study.spearman_all:.3f} overall, {study.spearman_top:.3f} top {top_count}.")
    return study


def emit_scatter(
    default_outcomes: Mapping[str, RunOutcome],
    configured_outcomes: Mapping[str, RunOutcome],
    path: Path,
    metric: CostMetric,
):
    """Per-instance default vs configured costs; failures appear at the k * kappa penalty."""
    rows = [
        {
            "instance": i,
            "default_cost": run_cost(default_outcomes[i], metric),
            "configured_cost": run_cost(configured_outcomes[i], metric),
            "default_status": default_outcomes[i].status.value,
            "configured_status": configured_outcomes[i].status.value,
        }
        for i in _aligned(default_outcomes, configured_outcomes)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=SCATTER_COLUMNS).to_csv(path, index=False)
