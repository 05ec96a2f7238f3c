"""
Command-line entry point: `cssc <subcommand> ...`.

Exit codes: 0 on success, 1 on a usage error, 2 when the input data or a run fails.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from src.core.config import APP_NAME, APP_VERSION, DEFAULT_CORES, DEFAULT_GRID_SIZE, configure_logging
from src.core.errors import CsscError
from src.models.metrics import CostMetric
from src.models.runs import RunOutcome, RunStatus
from src.services import harness
from src.services.analysis import approach_slowdowns, sample_correlation_study, speedup_record
from src.services.evaluation import instance_results
from src.services.execution.runner import execute_run, make_spec
from src.services.scenario.loader import load_scenario
from src.services.scoring import aggregate
from src.services.space.operations import default_configuration, discretize, sample_uniform
from src.services.space.pcs import format_value, parse_configuration, parse_pcs
from src.services.synthetic.catalog import KINDS, write_bundle

APPROACH_LABELS = ["paramils-discretized", "gga", "gga-discretized", "smac", "smac-discretized"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; usage errors exit with 1 here."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- Helpers ---


def _param_pairs(items: list[str] | None) -> dict[str, str]:
    pairs = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--param expects name=value, got {item!r}")
        pairs[name.strip().lstrip("-")] = value.strip()
    return pairs


def _config_args(config) -> str:
    return " ".join(f"-{name} {format_value(value)}" for name, value in config.active_items())


def _out_dir(args, name: str) -> Path:
    return Path(args.out_dir) if args.out_dir else harness.default_out_dir(name)


def _outcomes(runs) -> dict[str, RunOutcome]:
    return {run.instance: RunOutcome(RunStatus(run.status), run.runtime) for run in runs}


def _plan(args, scenario, approaches: list[str] | None = None):
    plan = harness.default_plan(
        scenario,
        cores=args.cores,
        budget_seconds=args.budget_seconds,
        max_runs=args.max_runs,
        seed=args.seed,
        grid_size=args.grid,
    )
    if approaches:
        unknown = set(approaches) - {a.label for a in plan.approaches}
        if unknown:
            raise UsageError(f"Unknown approach(es): {', '.join(sorted(unknown))}")
        plan = plan.model_copy(update={"approaches": [a for a in plan.approaches if a.label in approaches]})
    return plan


# --- Subcommands ---


def cmd_validate_space(args) -> int:
    space = parse_pcs(Path(args.pcs).read_text(encoding="utf-8"))
    conditional = sum(1 for name in space.names if space.is_conditional(name))
    print(
        f"{args.pcs}: {len(space)} parameters ({conditional} conditional), "
        f"{len(space.forbidden)} forbidden clauses, condition depth {space.condition_depth()}, "
        f"{'discrete' if space.is_discrete else 'mixed/continuous'}."
    )
    print(f"default: {_config_args(default_configuration(space))}")
    return 0


def cmd_sample(args) -> int:
    space = parse_pcs(Path(args.pcs).read_text(encoding="utf-8"))
    if args.grid is not None:
        space = discretize(space, args.grid)
    rng = np.random.default_rng(args.seed)
    for _ in range(args.n):
        print(_config_args(sample_uniform(space, rng)))
    return 0


def cmd_run_one(args) -> int:
    scenario = load_scenario(args.scenario)
    config = parse_configuration(scenario.space, _param_pairs(args.param))
    spec = make_spec(scenario, config, args.instance, args.seed, args.cutoff)
    outcome = execute_run(scenario, spec, log_dir=_out_dir(args, "run-one") / "run-logs")
    print(f"{outcome.status.value}, {outcome.runtime:g}{' (capped)' if outcome.capped else ''}")
    return 0


def cmd_configure(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.approach not in APPROACH_LABELS:
        raise UsageError(f"--approach must be one of {', '.join(APPROACH_LABELS)}")
    out_dir = _out_dir(args, Path(args.scenario).stem)
    result = harness.run_approach(_plan(args, scenario), args.approach, out_dir=out_dir)
    incumbent = result.incumbent
    payload = {
        "approach": args.approach,
        "config_id": incumbent.config_id,
        "config": {name: format_value(value) for name, value in incumbent.active_items()},
        "runs_used": result.runs_used,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "incumbent.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"{incumbent.config_id}: {_config_args(incumbent)}")
    return 0


def cmd_campaign(args) -> int:
    scenario = load_scenario(args.scenario)
    name = Path(args.scenario).stem
    report = harness.run_campaign(_plan(args, scenario, args.approach), _out_dir(args, name), name)
    print(harness.format_report(report), end="")
    return 0


def cmd_evaluate(args) -> int:
    scenario = load_scenario(args.scenario)
    config = parse_configuration(scenario.space, _param_pairs(args.param))
    outcomes = harness.evaluate_test_runs(scenario, config, args.cutoff, args.seed)
    metric = harness.evaluation_metric(scenario, args.cutoff)
    score = aggregate(list(outcomes.values()), metric)
    out_dir = _out_dir(args, Path(args.scenario).stem)
    out_dir.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([r.model_dump() for r in instance_results(outcomes, metric)]).to_csv(
        out_dir / "evaluation.csv", index=False
    )
    print(
        f"{config.config_id}: test PAR-{metric.k} {score.mean_cost:.4g} at cutoff {metric.kappa:g}s, "
        f"{score.timeout_count}/{score.attempted_count} timeouts."
    )
    return 0


def cmd_analyze(args) -> int:
    if args.mode == "speedup":
        if not args.paths:
            raise UsageError("analyze speedup needs at least one campaign directory")
        for path in args.paths:
            report = harness.load_report(Path(path) / "report.json")
            metric = CostMetric(k=1 if args.par1 else report.par_k, kappa=report.kappa)
            record = speedup_record(
                report.scenario_name,
                report.num_params,
                _outcomes(report.default_test_runs),
                _outcomes(report.configured_test_runs),
                metric,
            )
            factor = f"{record.speedup_factor:.4g}" if record.defined else "undefined"
            print(f"{record.label}\t{record.num_params}\tPAR-{record.metric_k}\t{factor}")
    elif args.mode == "slowdown":
        if not args.paths:
            raise UsageError("analyze slowdown needs at least one campaign directory")
        frames = [pd.read_csv(Path(path) / "report.csv") for path in args.paths]
        for approach, factor in approach_slowdowns(frames).items():
            print(f"{approach}\t{factor:.4g}")
    else:
        if not args.scenario:
            raise UsageError("analyze correlation needs --scenario")
        scenario = load_scenario(args.scenario)
        out_path = _out_dir(args, Path(args.scenario).stem) / "correlation.csv"
        study = sample_correlation_study(scenario, args.n, np.random.default_rng(args.seed), out_path)
        print(f"spearman_all\t{study.spearman_all:.4f}")
        print(f"spearman_top{study.top_count}\t{study.spearman_top:.4f}")
    return 0


def cmd_synth(args) -> int:
    paths = write_bundle(_out_dir(args, f"synth-{args.kind}"), args.kind, args.n_train, args.n_test, args.cutoff, args.noise)
    for key, path in paths.items():
        print(f"{key}\t{path}")
    return 0


# --- Parser ---


def _add_budget_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--scenario", required=True, help="Scenario file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--budget-seconds", type=float, default=None, help="Per configurator run; defaults to the scenario's wallclock_limit")
    parser.add_argument("--max-runs", type=int, default=None, help="Cap on target runs per configurator run")
    parser.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE, help="Values per numeric parameter when discretizing")
    parser.add_argument("--cores", type=int, default=DEFAULT_CORES)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    common.add_argument("--out-dir", default=None, help="Output directory (default: under OUTPUT_DIR)")

    parser = _Parser(prog="cssc", description=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate-space", parents=[common], help="Parse and validate a PCS file")
    p.add_argument("pcs")
    p.set_defaults(func=cmd_validate_space)

    p = sub.add_parser("sample", parents=[common], help="Draw uniform configurations from a PCS file")
    p.add_argument("pcs")
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=None, help="Sample the discretized space instead")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("run-one", parents=[common], help="Execute one target run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--param", action="append", help="name=value; repeatable")
    p.set_defaults(func=cmd_run_one)

    p = sub.add_parser("configure", parents=[common], help="Run one configuration approach")
    _add_budget_flags(p)
    p.add_argument("--approach", required=True, help=", ".join(APPROACH_LABELS))
    p.set_defaults(func=cmd_configure)

    p = sub.add_parser("campaign", parents=[common], help="Run all approaches, select on training, evaluate on test")
    _add_budget_flags(p)
    p.add_argument("--approach", action="append", help="Restrict to these approaches; repeatable")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("evaluate", parents=[common], help="Evaluate a configuration on the test set")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", action="append", help="name=value; repeatable. Unset parameters keep defaults")
    p.add_argument("--cutoff", type=float, default=None, help="Override the per-run cutoff and PAR penalty")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", parents=[common], help="Speedups, slowdowns and train/test correlation")
    p.add_argument("mode", choices=["speedup", "slowdown", "correlation"])
    p.add_argument("paths", nargs="*", help="Campaign output directories")
    p.add_argument("--par1", action="store_true", help="Speedups under PAR-1")
    p.add_argument("--scenario", default=None)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic scenario bundle")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--n-train", type=int, default=50)
    p.add_argument("--n-test", type=int, default=50)
    p.add_argument("--cutoff", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level)
        return args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (CsscError, OSError, ValueError) as e:
        logging.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
