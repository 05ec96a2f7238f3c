import logging
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from src.models.runs import RunOutcome, RunSpec
from src.models.scenario import Scenario
from src.services.execution.runner import RunHandle, execute_run


@dataclass
class Dispatched:
    """A submitted run: its spec, the handle used to cancel or tighten it, and its future."""

    spec: RunSpec
    handle: RunHandle
    future: Future = field(repr=False)

    def result(self) -> RunOutcome:
        return self.future.result()


class RunnerPool:
    """
    Executes up to `width` runs concurrently (defaults to the scenario's core count).
    Results can be consumed in completion order with their specs attached.
    """

    def __init__(self, scenario: Scenario, width: int | None = None, log_dir: Path | None = None):
        self.scenario = scenario
        self.width = max(1, width or scenario.cores)
        self.log_dir = log_dir
        self._executor = ThreadPoolExecutor(max_workers=self.width, thread_name_prefix="cssc-run")

    def submit(self, spec: RunSpec) -> Dispatched:
        handle = RunHandle(spec.cutoff_seconds)
        future = self._executor.submit(execute_run, self.scenario, spec, handle, self.log_dir)
        return Dispatched(spec=spec, handle=handle, future=future)

    @staticmethod
    def as_completed(dispatched: list[Dispatched]) -> Iterator[Dispatched]:
        pending = {d.future: d for d in dispatched}
        while pending:
            done, _ = wait(pending, return_when=FIRST_COMPLETED)
            for future in done:
                yield pending.pop(future)

    def shutdown(self):
        self._executor.shutdown(wait=True, cancel_futures=True)
        logging.debug("Runner pool shut down.")

    def __enter__(self) -> "RunnerPool":
        return self

    def __exit__(self, *exc):
        self.shutdown()
