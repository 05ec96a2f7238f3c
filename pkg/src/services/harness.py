"""
The configuration campaign: run every configuration approach, validate all their
incumbents on the full training set, pick the training-best, and evaluate only that
configuration (next to the default) on the test set.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import pandas as pd
from joblib import Parallel, delayed

from src.core.config import DEFAULT_CORES, OUTPUT_DIR
from src.core.errors import CampaignError, CsscError
from src.models.metrics import AggregateScore, CostMetric, RankingEntry
from src.models.runs import RunOutcome, RunStatus
from src.models.scenario import Scenario
from src.models.schemas import (
    ApproachOutcome,
    ApproachSpec,
    CampaignPlan,
    CampaignReport,
    ConfiguratorResult,
    IncumbentRecord,
)
from src.models.space import Configuration
from src.services.analysis import emit_scatter
from src.services.configurators.evaluator import Budget, write_trajectory
from src.services.configurators.gga import check_space_supported, run_gga
from src.services.configurators.paramils import run_focused_ils
from src.services.configurators.smac import run_smac
from src.services.evaluation import derive_seed, evaluate_on, instance_results
from src.services.execution.pool import RunnerPool
from src.services.scoring import aggregate, rank
from src.services.space.operations import default_configuration, discretize
from src.services.space.pcs import format_value


def default_plan(
    scenario: Scenario,
    cores: int = DEFAULT_CORES,
    budget_seconds: float | None = None,
    max_runs: int | None = None,
    seed: int = 0,
    grid_size: int | None = None,
) -> CampaignPlan:
    """
    The five-approach pipeline: ParamILS on the discretized space, GGA and SMAC on both
    variants. ParamILS and SMAC get `cores` independent runs, GGA one run `cores` wide.
    """
    approaches = [
        ApproachSpec(configurator="paramils", space_variant="discretized", runs=cores),
        ApproachSpec(configurator="gga", space_variant="native", units=cores),
        ApproachSpec(configurator="gga", space_variant="discretized", units=cores),
        ApproachSpec(configurator="smac", space_variant="native", runs=cores),
        ApproachSpec(configurator="smac", space_variant="discretized", runs=cores),
    ]
    extra = {"grid_size": grid_size} if grid_size is not None else {}
    return CampaignPlan(
        scenario=scenario,
        approaches=approaches,
        budget_seconds=scenario.wallclock_budget_seconds if budget_seconds is None else budget_seconds,
        max_runs=max_runs,
        cores=cores,
        seed=seed,
        **extra,
    )


# --- Running approaches ---


@dataclass
class _RunTask:
    approach: ApproachSpec
    run_index: int
    seed: int
    scenario: Scenario


def make_budget(plan: CampaignPlan, scenario: Scenario, width: int = 1) -> Budget:
    """
    In-process targets spend target seconds, process targets wall-clock seconds. A run
    `width` cores wide gets `width` times the target-second and run budgets.
    """
    max_runs = None if plan.max_runs is None else plan.max_runs * width
    if scenario.in_process:
        return Budget(max_runs=max_runs, max_target_seconds=plan.budget_seconds * width)
    return Budget(max_runs=max_runs, max_wallclock=plan.budget_seconds)


def _artifact_paths(out_dir: Path | None, task: _RunTask) -> tuple[Path | None, Path | None]:
    if out_dir is None:
        return None, None
    stem = f"{task.approach.label}-{task.run_index}"
    return out_dir / "ledgers" / f"{stem}.csv", out_dir / "trajectories" / f"{stem}.csv"


def _run_task(plan: CampaignPlan, task: _RunTask, out_dir: Path | None) -> ConfiguratorResult:
    ledger_path, trajectory_path = _artifact_paths(out_dir, task)
    approach = task.approach
    if approach.configurator == "paramils":
        result = run_focused_ils(task.scenario, make_budget(plan, task.scenario), task.seed, plan.ils, None, ledger_path)
    elif approach.configurator == "smac":
        result = run_smac(task.scenario, make_budget(plan, task.scenario), task.seed, plan.smac, None, ledger_path)
    else:
        params = plan.gga.model_copy(update={"units": approach.units})
        budget = make_budget(plan, task.scenario, approach.units)
        with RunnerPool(task.scenario, width=approach.units) as pool:
            result = run_gga(task.scenario, budget, task.seed, params, pool, ledger_path)
    if trajectory_path is not None:
        write_trajectory(result.trajectory, trajectory_path)
    return result


def _safe_run(plan: CampaignPlan, task: _RunTask, out_dir: Path | None) -> tuple[_RunTask, ConfiguratorResult | None, str | None]:
    try:
        return task, _run_task(plan, task, out_dir), None
    except (CsscError, OSError) as e:
        logging.warning(f"{task.approach.label} run {task.run_index} failed: {e}")
        return task, None, str(e)


def _tasks(plan: CampaignPlan, native: Scenario, discretized: Scenario | None) -> tuple[list[_RunTask], dict[str, str]]:
    tasks, excluded = [], {}
    for approach in plan.approaches:
        scenario = native if approach.space_variant == "native" else discretized
        if scenario is None:
            excluded[approach.label] = "the space could not be discretized"
            continue
        if approach.configurator == "gga":
            try:
                check_space_supported(scenario.space)
            except CsscError as e:
                excluded[approach.label] = str(e)
                logging.warning(f"Excluding {approach.label}: {e}")
                continue
        runs = 1 if approach.configurator == "gga" else approach.runs
        for run_index in range(runs):
            seed = derive_seed(plan.seed, approach.label, run_index)
            tasks.append(_RunTask(approach, run_index, seed, scenario))
    return tasks, excluded


def run_approach(plan: CampaignPlan, label: str, run_index: int = 0, out_dir: Path | None = None) -> ConfiguratorResult:
    """One run of a single approach of `plan`, seeded exactly as inside a campaign."""
    approach = next((a for a in plan.approaches if a.label == label), None)
    if approach is None:
        raise CampaignError(f"Unknown approach '{label}'; the plan has {[a.label for a in plan.approaches]}.")
    scenario = plan.scenario.with_cores(plan.cores)
    if approach.space_variant == "discretized" and not scenario.space.is_discrete:
        scenario = scenario.with_space(discretize(scenario.space, plan.grid_size))
    if approach.configurator == "gga":
        check_space_supported(scenario.space)
    task = _RunTask(approach, run_index, derive_seed(plan.seed, approach.label, run_index), scenario)
    return _run_task(plan, task, Path(out_dir) if out_dir is not None else None)


# --- Validation, selection, test ---


def _as_text(config: Configuration) -> dict[str, str]:
    return {name: format_value(value) for name, value in config.active_items()}


def test_evaluate(
    scenario: Scenario,
    config: Configuration,
    cutoff_override: float | None = None,
    campaign_seed: int = 0,
    pool: RunnerPool | None = None,
) -> AggregateScore:
    """
    One run per test instance. A cutoff override replaces kappa for both the runs and
    the PAR-k penalty.
    """
    outcomes = evaluate_test_runs(scenario, config, cutoff_override, campaign_seed, pool)
    return aggregate(list(outcomes.values()), evaluation_metric(scenario, cutoff_override))


# Not a pytest test despite the name.
test_evaluate.__test__ = False


def evaluation_metric(scenario: Scenario, cutoff_override: float | None) -> CostMetric:
    return scenario.metric if cutoff_override is None else CostMetric(k=scenario.par_k, kappa=cutoff_override)


def evaluate_test_runs(
    scenario: Scenario,
    config: Configuration,
    cutoff_override: float | None = None,
    campaign_seed: int = 0,
    pool: RunnerPool | None = None,
) -> dict[str, RunOutcome]:
    if cutoff_override is not None:
        if not (cutoff_override > 0 and math.isfinite(cutoff_override)):
            raise CampaignError(f"The evaluation cutoff must be positive and finite, got {cutoff_override}.")
        scenario = scenario.model_copy(update={"cutoff_seconds": float(cutoff_override)})
    return evaluate_on(scenario, config, scenario.test.ids, campaign_seed, pool)


def select_incumbent(incumbents: list[IncumbentRecord], configs: Mapping[str, Configuration]) -> IncumbentRecord | None:
    """Training-best incumbent; ties go to the approach label, then the configuration's sort key."""
    if not incumbents:
        return None
    return min(
        incumbents,
        key=lambda inc: (inc.train.mean_cost, inc.approach, configs[inc.config_id].sort_key(), inc.run_index),
    )


def run_campaign(
    plan: CampaignPlan,
    out_dir: Path | None = None,
    name: str = "scenario",
) -> CampaignReport:
    """
    Runs every approach (independent runs in parallel threads), validates each incumbent
    exactly on the full training set, selects the best and evaluates it and the default
    on the test set. A failing approach is recorded and excluded, never fatal.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    scenario = plan.scenario.with_cores(plan.cores)
    metric = scenario.metric
    try:
        discretized = scenario if scenario.space.is_discrete else scenario.with_space(discretize(scenario.space, plan.grid_size))
    except CsscError as e:
        logging.warning(f"Cannot discretize the space: {e}")
        discretized = None

    tasks, excluded = _tasks(plan, scenario, discretized)
    logging.info(f"Campaign '{name}': {len(tasks)} configurator runs on {plan.cores} cores.")
    finished = Parallel(n_jobs=max(1, min(plan.cores, len(tasks) or 1)), backend="threading")(
        delayed(_safe_run)(plan, task, out_dir) for task in tasks
    )

    default = default_configuration(scenario.space)
    histories = [result.history for _, result, _ in finished if result is not None]
    with RunnerPool(scenario, width=1 if scenario.in_process else plan.cores) as pool:
        validated: dict[Configuration, AggregateScore] = {}

        def validate(config: Configuration) -> AggregateScore:
            if config not in validated:
                outcomes = evaluate_on(scenario, config, scenario.train.ids, plan.seed, pool, reuse=histories)
                validated[config] = aggregate(list(outcomes.values()), metric)
            return validated[config]

        outcomes_by_label: dict[str, ApproachOutcome] = {
            approach.label: ApproachOutcome(approach=approach.label, error=excluded.get(approach.label))
            for approach in plan.approaches
        }
        configs: dict[str, Configuration] = {}
        for task, result, error in finished:
            outcome = outcomes_by_label[task.approach.label]
            if result is None:
                outcome.error = error
                continue
            incumbent = result.incumbent
            configs[incumbent.config_id] = incumbent
            outcome.incumbents.append(
                IncumbentRecord(
                    approach=task.approach.label,
                    run_index=task.run_index,
                    config_id=incumbent.config_id,
                    config=_as_text(incumbent),
                    train=validate(incumbent),
                )
            )

        approaches = list(outcomes_by_label.values())
        all_incumbents = [inc for outcome in approaches for inc in outcome.incumbents]
        selected = select_incumbent(all_incumbents, configs)
        chosen = configs[selected.config_id] if selected else default
        if selected is None:
            logging.warning("No approach produced an incumbent; the default configuration is selected.")

        default_runs = evaluate_test_runs(scenario, default, campaign_seed=plan.seed, pool=pool)
        configured_runs = default_runs if chosen == default else evaluate_test_runs(scenario, chosen, campaign_seed=plan.seed, pool=pool)

        report = CampaignReport(
            scenario_name=name,
            num_params=len(scenario.space),
            seed=plan.seed,
            par_k=metric.k,
            kappa=metric.kappa,
            approaches=approaches,
            default_config=_as_text(default),
            default_train=validate(default),
            selected=selected,
            default_test=aggregate(list(default_runs.values()), metric),
            configured_test=aggregate(list(configured_runs.values()), metric),
            default_test_runs=instance_results(default_runs, metric),
            configured_test_runs=instance_results(configured_runs, metric),
        )

    if out_dir is not None:
        write_report(report, out_dir)
        emit_scatter(default_runs, configured_runs, out_dir / "scatter.csv", metric)
    logging.info(
        f"Campaign '{name}' selected {report.selected_label}: test PAR-{metric.k} "
        f"{report.default_test.mean_cost:.4g} -> {report.configured_test.mean_cost:.4g}."
    )
    return report


# --- Reports ---


def report_frame(report: CampaignReport) -> pd.DataFrame:
    selected = report.selected
    rows = [
        {
            "approach": "default",
            "run": -1,
            "config_id": "",
            "train_cost": report.default_train.mean_cost,
            "train_solved": report.default_train.solved_count,
            "selected": selected is None,
            "error": "",
        }
    ]
    for outcome in report.approaches:
        if not outcome.incumbents:
            rows.append(
                {
                    "approach": outcome.approach,
                    "run": -1,
                    "config_id": "",
                    "train_cost": math.nan,
                    "train_solved": 0,
                    "selected": False,
                    "error": outcome.error or "no incumbent",
                }
            )
        for inc in outcome.incumbents:
            rows.append(
                {
                    "approach": inc.approach,
                    "run": inc.run_index,
                    "config_id": inc.config_id,
                    "train_cost": inc.train.mean_cost,
                    "train_solved": inc.train.solved_count,
                    "selected": selected is not None
                    and (inc.approach, inc.run_index) == (selected.approach, selected.run_index),
                    "error": "",
                }
            )
    return pd.DataFrame(rows)


def format_report(report: CampaignReport) -> str:
    frame = report_frame(report)
    tested = report.default_test.attempted_count
    lines = [
        f"Scenario {report.scenario_name} (seed {report.seed}, PAR-{report.par_k}, cutoff {report.kappa:g}s)",
        "",
        frame.to_string(index=False, float_format=lambda v: f"{v:.4g}"),
        "",
        f"Selected: {report.selected_label}"
        + (f" {report.selected.config_id} {report.selected.config}" if report.selected else ""),
        f"Test PAR-{report.par_k}: {report.default_test.mean_cost:.4g} -> {report.configured_test.mean_cost:.4g}",
        f"Test timeouts (default -> configured): {report.default_test.timeout_count}/{tested}"
        f" -> {report.configured_test.timeout_count}/{tested}",
    ]
    return "\n".join(lines) + "\n"


def write_report(report: CampaignReport, out_dir: Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(format_report(report), encoding="utf-8")
    report_frame(report).to_csv(out_dir / "report.csv", index=False)
    (out_dir / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")


def load_report(path: Path) -> CampaignReport:
    return CampaignReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def rank_campaigns(entries: Mapping[str, list[CampaignReport]], metric: CostMetric) -> list[RankingEntry]:
    """
    Ranks entries on their pooled configured test runs across benchmarks. Every entry
    must cover the same benchmarks and instances.
    """
    pooled = []
    for label, reports in entries.items():
        outcomes = {}
        for report in reports:
            for run in report.configured_test_runs:
                outcomes[f"{report.scenario_name}/{run.instance}"] = RunOutcome(RunStatus(run.status), run.runtime)
        pooled.append((label, outcomes))
    return rank(pooled, metric)


def default_out_dir(name: str) -> Path:
    return OUTPUT_DIR / name
