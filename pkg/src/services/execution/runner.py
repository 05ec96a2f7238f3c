"""
Supervised execution of single target-algorithm runs.

Process targets are spawned in their own session, polled with psutil for wall-clock
and resident-memory limits, and killed as a whole process tree on violation. Target
misbehaviour never raises: every failure maps to a RunStatus.
"""
import logging
import math
import re
import shlex
import subprocess
import tempfile
import threading
import time
from pathlib import Path

import psutil

from src.core.config import ENFORCEMENT_GRACE_SECONDS, OUTPUT_DIR, RUNNER_POLL_INTERVAL
from src.core.errors import RunnerError
from src.models.runs import ExpectedStatus, RunOutcome, RunSpec, RunStatus
from src.models.scenario import Scenario
from src.models.space import Configuration

RESULT_LINE = re.compile(
    r"^\s*Result for (?:configurator|ParamILS|SMAC)\s*:\s*([A-Za-z_]+)\s*,\s*([^,\s]+)"
)
_REPORTED_STATUS = {
    "SAT": RunStatus.SAT,
    "UNSAT": RunStatus.UNSAT,
    "SUCCESS": RunStatus.SUCCESS,
    "TIMEOUT": RunStatus.TIMEOUT,
    "CRASHED": RunStatus.CRASHED,
    "MEMOUT": RunStatus.MEMOUT,
    "ABORT": RunStatus.CRASHED,
}


class RunHandle:
    """Lets another thread abort a dispatched run or lower its cutoff while it runs."""

    def __init__(self, cutoff: float = math.inf):
        self._cancelled = threading.Event()
        self._lock = threading.Lock()
        self._cutoff = cutoff

    def cancel(self):
        self._cancelled.set()

    @property
    def cancelled(self) -> bool:
        return self._cancelled.is_set()

    def tighten(self, cutoff: float):
        with self._lock:
            self._cutoff = min(self._cutoff, cutoff)

    @property
    def cutoff(self) -> float:
        with self._lock:
            return self._cutoff


def interpret_wrapper_output(raw: str, expected: ExpectedStatus = ExpectedStatus.UNKNOWN) -> RunOutcome:
    """
    Reads the last result line of a wrapper's standard output. Missing or malformed
    results are CRASHED; a SAT/UNSAT answer contradicting `expected` is WRONG_ANSWER.
    """
    match = None
    for line in raw.splitlines():
        candidate = RESULT_LINE.match(line)
        if candidate:
            match = candidate
    if match is None:
        return RunOutcome(RunStatus.CRASHED, 0.0)

    status = _REPORTED_STATUS.get(match.group(1).upper())
    try:
        runtime = float(match.group(2))
    except ValueError:
        return RunOutcome(RunStatus.CRASHED, 0.0)
    if status is None or not math.isfinite(runtime) or runtime < 0:
        return RunOutcome(RunStatus.CRASHED, 0.0)
    return RunOutcome(verify(status, expected), runtime)


def verify(status: RunStatus, expected: ExpectedStatus) -> RunStatus:
    """Cross-checks a reported answer against the instance's known status."""
    contradictions = {
        (RunStatus.SAT, ExpectedStatus.UNSAT),
        (RunStatus.UNSAT, ExpectedStatus.SAT),
    }
    if (status, expected) in contradictions:
        return RunStatus.WRONG_ANSWER
    return status


def penalized_cost(outcome: RunOutcome, kappa: float, k: int = 10) -> float:
    """
    PAR-k cost of one run. Solved runs cost their runtime; capped timeouts cost their
    runtime as a lower bound; every other failure costs k * kappa.
    """
    if outcome.solved:
        cost = outcome.runtime
    elif outcome.status is RunStatus.TIMEOUT and outcome.capped:
        cost = outcome.runtime
    else:
        cost = k * kappa
    return min(max(cost, 0.0), k * kappa)


def build_command(scenario: Scenario, spec: RunSpec) -> list[str]:
    """<cmd> <instance> <instance_info> <cutoff> -1 <seed> -name value ... (inactive omitted)."""
    command = shlex.split(scenario.target_command)
    command += [spec.instance_id, scenario.instance_info, f"{spec.cutoff_seconds:g}", "-1", str(spec.seed)]
    for name, value in spec.config.active_items():
        command += [f"-{name}", str(value)]
    return command


def _finalize(outcome: RunOutcome, cutoff: float, kappa: float) -> RunOutcome:
    """Clamps runtimes to the cutoff and derives the capped flag."""
    status, runtime = outcome.status, outcome.runtime
    if status.solved and runtime > cutoff:
        status = RunStatus.TIMEOUT
    if status is RunStatus.TIMEOUT:
        runtime = cutoff
    runtime = min(max(runtime, 0.0), cutoff)
    return RunOutcome(status, runtime, capped=status is RunStatus.TIMEOUT and cutoff < kappa)


def _execute_in_process(scenario: Scenario, spec: RunSpec, handle: RunHandle | None) -> RunOutcome:
    cutoff = min(spec.cutoff_seconds, handle.cutoff) if handle else spec.cutoff_seconds
    if handle is not None and handle.cancelled:
        return RunOutcome(RunStatus.TIMEOUT, 0.0, capped=True)
    outcome = scenario.target.evaluate(spec.config, spec.instance_id, spec.seed, cutoff)
    expected = scenario.train.expected_status(spec.instance_id)
    if expected is ExpectedStatus.UNKNOWN:
        expected = scenario.test.expected_status(spec.instance_id)
    outcome = RunOutcome(verify(outcome.status, expected), outcome.runtime, outcome.capped)
    return _finalize(outcome, cutoff, scenario.cutoff_seconds)


def _tree_memory_mb(process: psutil.Process) -> float:
    total = 0
    try:
        members = [process] + process.children(recursive=True)
    except psutil.NoSuchProcess:
        return 0.0
    for member in members:
        try:
            total += member.memory_info().rss
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            pass
    return total / (1024.0 * 1024.0)


def kill_tree(process: psutil.Process):
    try:
        members = process.children(recursive=True) + [process]
    except psutil.NoSuchProcess:
        return
    for member in members:
        try:
            member.kill()
        except psutil.NoSuchProcess:
            pass
    psutil.wait_procs(members, timeout=ENFORCEMENT_GRACE_SECONDS)


def _stderr_path(log_dir: Path, spec: RunSpec) -> Path:
    safe_instance = re.sub(r"[^A-Za-z0-9_.\-]", "_", spec.instance_id)[-60:]
    return log_dir / f"{spec.config.config_id}_{safe_instance}_{spec.seed}.stderr"


def _execute_process(
    scenario: Scenario, spec: RunSpec, handle: RunHandle | None, log_dir: Path
) -> RunOutcome:
    command = build_command(scenario, spec)
    log_dir.mkdir(parents=True, exist_ok=True)
    stderr_path = _stderr_path(log_dir, spec)
    logging.debug(f"Running: {shlex.join(command)}")

    with tempfile.TemporaryFile(mode="w+") as stdout, open(stderr_path, "w") as stderr:
        start = time.monotonic()
        try:
            process = subprocess.Popen(
                command,
                stdout=stdout,
                stderr=stderr,
                stdin=subprocess.DEVNULL,
                cwd=scenario.execdir,
                start_new_session=True,
            )
        except OSError as e:
            raise RunnerError(f"Cannot start target wrapper {command[0]!r}: {e}") from e

        try:
            monitored = psutil.Process(process.pid)
        except psutil.NoSuchProcess:
            monitored = None

        violation: RunStatus | None = None
        cancelled = False
        while True:
            try:
                process.wait(timeout=RUNNER_POLL_INTERVAL)
                break
            except subprocess.TimeoutExpired:
                pass
            elapsed = time.monotonic() - start
            cutoff = min(spec.cutoff_seconds, handle.cutoff) if handle else spec.cutoff_seconds
            if handle is not None and handle.cancelled:
                cancelled = True
            elif elapsed > cutoff + ENFORCEMENT_GRACE_SECONDS:
                violation = RunStatus.TIMEOUT
            elif monitored is not None and _tree_memory_mb(monitored) > spec.memory_limit_mb:
                violation = RunStatus.MEMOUT
            if cancelled or violation is not None:
                if monitored is not None:
                    kill_tree(monitored)
                process.wait()
                break

        elapsed = time.monotonic() - start
        cutoff = min(spec.cutoff_seconds, handle.cutoff) if handle else spec.cutoff_seconds
        stdout.seek(0)
        raw = stdout.read()

    if cancelled:
        return RunOutcome(RunStatus.TIMEOUT, min(elapsed, cutoff), capped=True)
    if violation is RunStatus.TIMEOUT:
        return _finalize(RunOutcome(RunStatus.TIMEOUT, cutoff), cutoff, scenario.cutoff_seconds)
    if violation is RunStatus.MEMOUT:
        logging.debug(f"Run exceeded {spec.memory_limit_mb} MB on '{spec.instance_id}'.")
        return RunOutcome(RunStatus.MEMOUT, min(elapsed, cutoff))
    if process.returncode < 0:
        return RunOutcome(RunStatus.CRASHED, min(elapsed, cutoff))

    expected = scenario.train.expected_status(spec.instance_id)
    if expected is ExpectedStatus.UNKNOWN:
        expected = scenario.test.expected_status(spec.instance_id)
    outcome = interpret_wrapper_output(raw, expected)
    if outcome.status is RunStatus.CRASHED:
        return RunOutcome(RunStatus.CRASHED, min(elapsed, cutoff))
    return _finalize(outcome, cutoff, scenario.cutoff_seconds)


def execute_run(
    scenario: Scenario, spec: RunSpec, handle: RunHandle | None = None, log_dir: Path | None = None
) -> RunOutcome:
    """
    Executes one run and returns its outcome. Blocking and thread-safe; only
    framework-side failures (e.g. a missing wrapper binary) raise RunnerError.
    """
    if scenario.in_process:
        return _execute_in_process(scenario, spec, handle)
    return _execute_process(scenario, spec, handle, Path(log_dir or OUTPUT_DIR / "run-logs"))


def make_spec(scenario: Scenario, config: Configuration, instance_id: str, seed: int, cutoff: float | None = None) -> RunSpec:
    cutoff = scenario.cutoff_seconds if cutoff is None else cutoff
    return RunSpec(
        config=config,
        instance_id=instance_id,
        seed=seed,
        cutoff_seconds=cutoff,
        memory_limit_mb=scenario.memory_limit_mb,
    )
