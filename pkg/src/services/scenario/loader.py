import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.core.config import (
    DEFAULT_CORES,
    DEFAULT_MEMORY_LIMIT_MB,
    DEFAULT_PAR_K,
    DEFAULT_WALLCLOCK_BUDGET,
)
from src.core.errors import CsscError, ScenarioError
from src.models.runs import ExpectedStatus
from src.models.scenario import InstanceFeatures, InstanceSet, Scenario
from src.services.space.pcs import parse_pcs

MANDATORY_KEYS = ("algo", "paramfile", "instance_file", "test_instance_file", "cutoff_time")
OPTIONAL_KEYS = (
    "feature_file",
    "memory_limit_mb",
    "wallclock_limit",
    "cores",
    "par_k",
    "deterministic",
    "test_sample",
    "seed",
    "execdir",
    "instance_info",
)
SYNTHETIC_PREFIX = "synthetic:"

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _read_text(path: Path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"Cannot read {what} '{path}': {e.strerror or e}") from e


def load_instances(path: Path) -> InstanceSet:
    """One instance per non-empty line, optionally followed by SAT, UNSAT or UNKNOWN."""
    ids: list[str] = []
    expected: dict[str, ExpectedStatus] = {}
    for line_no, raw in enumerate(_read_text(path, "instance file").splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if len(tokens) > 2:
            raise ScenarioError(f"{path}:{line_no}: expected '<instance> [status]', got {raw.strip()!r}")
        instance_id = tokens[0]
        if instance_id in expected:
            raise ScenarioError(f"{path}:{line_no}: duplicate instance '{instance_id}'")
        try:
            status = ExpectedStatus(tokens[1]) if len(tokens) == 2 else ExpectedStatus.UNKNOWN
        except ValueError:
            raise ScenarioError(f"{path}:{line_no}: bad status token {tokens[1]!r}") from None
        ids.append(instance_id)
        expected[instance_id] = status
    if not ids:
        raise ScenarioError(f"Instance file '{path}' lists no instances.")
    return InstanceSet.of(ids, expected)


def load_features(path: Path, train: InstanceSet) -> InstanceFeatures:
    """Reads an 'instance,<f1>,<f2>,...' CSV; rows for instances outside `train` are ignored."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        raise ScenarioError(f"Cannot read feature file '{path}': {e.strerror or e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ScenarioError(f"Malformed feature file '{path}': {e}") from e

    if frame.columns.empty or frame.columns[0] != "instance":
        raise ScenarioError(f"Feature file '{path}' must start with an 'instance' column.")
    feature_names = tuple(str(c) for c in frame.columns[1:])
    if not feature_names:
        raise ScenarioError(f"Feature file '{path}' declares no features.")

    try:
        values = frame[list(feature_names)].apply(pd.to_numeric, errors="raise").astype(float)
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"Non-numeric feature value in '{path}': {e}") from e
    if not np.isfinite(values.to_numpy()).all():
        raise ScenarioError(f"Feature file '{path}' contains missing or non-finite values.")

    train_ids = set(train.ids)
    rows: dict[str, tuple[float, ...]] = {}
    for instance_id, row in zip(frame["instance"], values.itertuples(index=False)):
        if instance_id not in train_ids:
            logging.warning(f"Ignoring features for '{instance_id}': not a training instance.")
            continue
        if instance_id in rows:
            raise ScenarioError(f"Feature file '{path}' lists '{instance_id}' twice.")
        rows[instance_id] = tuple(float(v) for v in row)

    missing = len(train_ids) - len(rows)
    if missing:
        logging.info(f"{missing} training instances have no features; the model will ignore features.")
    return InstanceFeatures(feature_names=feature_names, rows=rows)


def _parse_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in MANDATORY_KEYS and key not in OPTIONAL_KEYS:
            raise ScenarioError(f"line {line_no}: unknown scenario key '{key}'")
        if key in pairs:
            raise ScenarioError(f"line {line_no}: duplicate scenario key '{key}'")
        pairs[key] = value
    missing = [key for key in MANDATORY_KEYS if key not in pairs]
    if missing:
        raise ScenarioError(f"Scenario is missing mandatory keys: {', '.join(missing)}")
    return pairs


def _number(pairs: dict, key: str, cast, default):
    if key not in pairs:
        return default
    try:
        return cast(pairs[key])
    except ValueError:
        raise ScenarioError(f"Scenario key '{key}' expects a number, got {pairs[key]!r}") from None


def _flag(pairs: dict, key: str) -> bool:
    value = pairs.get(key, "false").lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ScenarioError(f"Scenario key '{key}' expects true/false, got {pairs[key]!r}")


def _subsample(test: InstanceSet, size: int, seed: int) -> InstanceSet:
    if size <= 0 or size > len(test):
        raise ScenarioError(f"test_sample must lie in [1, {len(test)}], got {size}")
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(len(test), size=size, replace=False).tolist())
    return InstanceSet(instances=tuple(entry for i, entry in enumerate(test.instances) if i in keep))


def parse_scenario(text: str, base_dir: Path = Path(".")) -> Scenario:
    """
    Builds a validated Scenario from 'key = value' text. Relative file references are
    resolved against `base_dir`.
    """
    pairs = _parse_pairs(text)
    base_dir = Path(base_dir)

    def resolve(value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else base_dir / path

    try:
        space = parse_pcs(_read_text(resolve(pairs["paramfile"]), "parameter file"))
    except ScenarioError:
        raise
    except CsscError as e:
        raise ScenarioError(f"Invalid parameter file '{pairs['paramfile']}': {e}") from e

    train = load_instances(resolve(pairs["instance_file"]))
    test = load_instances(resolve(pairs["test_instance_file"]))
    overlap = sorted(set(train.ids) & set(test.ids))
    if overlap:
        raise ScenarioError(f"Invalid scenario: train and test sets overlap: {', '.join(overlap)}")
    seed = _number(pairs, "seed", int, 0)
    if "test_sample" in pairs:
        test = _subsample(test, _number(pairs, "test_sample", int, 0), seed)
    features = load_features(resolve(pairs["feature_file"]), train) if "feature_file" in pairs else None

    algo = pairs["algo"]
    target = None
    if algo.startswith(SYNTHETIC_PREFIX):
        # Imported lazily: synthetic surfaces depend on the scenario model.
        from src.services.synthetic.surfaces import SyntheticTarget, load_surface

        target = SyntheticTarget(load_surface(resolve(algo[len(SYNTHETIC_PREFIX):])))

    try:
        scenario = Scenario(
            target_command=algo,
            space=space,
            train=train,
            test=test,
            features=features,
            cutoff_seconds=_number(pairs, "cutoff_time", float, None),
            memory_limit_mb=_number(pairs, "memory_limit_mb", int, DEFAULT_MEMORY_LIMIT_MB),
            wallclock_budget_seconds=_number(pairs, "wallclock_limit", float, DEFAULT_WALLCLOCK_BUDGET),
            cores=_number(pairs, "cores", int, DEFAULT_CORES),
            par_k=_number(pairs, "par_k", int, DEFAULT_PAR_K),
            deterministic=_flag(pairs, "deterministic"),
            seed=seed,
            execdir=resolve(pairs["execdir"]) if "execdir" in pairs else base_dir,
            instance_info=pairs.get("instance_info", "0"),
            target=target,
        )
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {e}") from e
    logging.info(
        f"Loaded scenario: {len(space)} parameters, {len(train)} train / {len(test)} test instances, "
        f"cutoff {scenario.cutoff_seconds}s."
    )
    return scenario


def load_scenario(path: Path) -> Scenario:
    path = Path(path)
    return parse_scenario(_read_text(path, "scenario file"), base_dir=path.resolve().parent)
