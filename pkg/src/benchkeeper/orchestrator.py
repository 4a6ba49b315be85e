"""Plan and execute benchmark runs, one dedicated directory per run.

Each run directory holds ``command.txt`` and ``spec.bk`` (written at planning
time), ``stdout.log``/``stderr.log`` (written during execution) and
``record.json`` (the stored RunRecord), plus whatever the command writes.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import signal
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Protocol, Sequence

from ._time import format_ts, utcnow
from .records import RunRecord
from .specmatrix import BenchmarkSpec, Configuration, MetricSource, render_command, serialize_spec
from .store import Store

log = logging.getLogger(__name__)

KILL_GRACE_SECONDS = 5.0
POLL_INTERVAL = 0.05

ARCHIVE_FILES = ("command.txt", "spec.bk", "stdout.log", "stderr.log", "record.json")


class PlanningError(OSError):
    pass


@dataclass
class RunPlan:
    run_id: str
    spec_name: str
    configuration: Configuration
    command: str
    run_dir: Path
    timeout_seconds: int
    spec: BenchmarkSpec = field(repr=False)
    seq: int = 0
    machine_label: str = ""


# --------------------------------------------------------------------------- job states


@dataclass(frozen=True)
class Queued:
    pass


@dataclass(frozen=True)
class Running:
    pass


@dataclass(frozen=True)
class Finished:
    exit_status: int | None  # None: cancelled before reporting a status


class SubmissionRefused(Exception):
    pass


class Executor(Protocol):
    def submit(self, plan: RunPlan) -> object: ...

    def poll(self, handle: object) -> Queued | Running | Finished: ...

    def cancel(self, handle: object) -> None: ...


class LocalExecutor:
    """Runs the command through ``/bin/sh`` in the run directory."""

    def __init__(self, kill_grace: float = KILL_GRACE_SECONDS):
        self.kill_grace = kill_grace

    def submit(self, plan: RunPlan) -> subprocess.Popen:
        with open(plan.run_dir / "stdout.log", "ab") as out, open(plan.run_dir / "stderr.log", "ab") as err:
            try:
                return subprocess.Popen(
                    plan.command,
                    shell=True,
                    cwd=plan.run_dir,
                    stdin=subprocess.DEVNULL,
                    stdout=out,
                    stderr=err,
                    start_new_session=True,
                )
            except OSError as exc:
                raise SubmissionRefused(str(exc)) from exc

    def poll(self, handle: subprocess.Popen) -> Running | Finished:
        rc = handle.poll()
        if rc is None:
            return Running()
        return Finished(_shell_status(rc))

    def cancel(self, handle: subprocess.Popen) -> None:
        """SIGTERM the process group, SIGKILL it after the grace period."""
        if handle.poll() is not None:
            return
        _signal_group(handle, signal.SIGTERM)
        try:
            handle.wait(timeout=self.kill_grace)
        except subprocess.TimeoutExpired:
            _signal_group(handle, signal.SIGKILL)
            handle.wait()


def _signal_group(proc: subprocess.Popen, sig: int) -> None:
    try:
        os.killpg(proc.pid, sig)
    except ProcessLookupError:
        pass


def _shell_status(rc: int) -> int:
    # Popen reports death-by-signal as -signum; shells report 128 + signum
    return 128 - rc if rc < 0 else rc


# --------------------------------------------------------------------------- simulated executor


OUTCOMES = ("run-normally", "hang-forever", "refuse-submission")


@dataclass
class ScenarioStep:
    queue_delay: float = 0.0
    outcome: str = "run-normally"
    elapsed: float | None = None  # overrides the measured wall clock in the record
    exit_status: int | None = None  # finish with this status without running the command

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown scenario outcome {self.outcome!r}")
        if self.queue_delay < 0:
            raise ValueError("queue_delay must be >= 0")
        if self.elapsed is not None and self.elapsed < 0:
            raise ValueError("elapsed override must be >= 0")


@dataclass
class ExecutorScenario:
    steps: list[ScenarioStep]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("scenario needs at least one step")

    def step(self, i: int) -> ScenarioStep:
        # the last entry repeats
        return self.steps[min(i, len(self.steps) - 1)]

    @classmethod
    def from_json(cls, doc) -> ExecutorScenario:
        steps = doc["steps"] if isinstance(doc, dict) else doc
        if not isinstance(steps, list):
            raise ValueError("scenario must be a list of steps or {'steps': [...]}")
        allowed = {"queue_delay", "outcome", "elapsed", "exit_status"}
        out = []
        for s in steps:
            if not isinstance(s, dict) or set(s) - allowed:
                raise ValueError(f"bad scenario step {s!r}")
            out.append(ScenarioStep(**s))
        return cls(out)

    @classmethod
    def load(cls, path: str | Path) -> ExecutorScenario:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class _SimJob:
    step: ScenarioStep
    plan: RunPlan
    polls: int = 0
    proc: subprocess.Popen | None = None
    cancelled: bool = False


class SimulatedExecutor:
    """Batch-scheduler stand-in driven by an ExecutorScenario.

    Queue delays run on a virtual clock that advances ``tick`` seconds per
    poll, so a job with delay 3 reports queued on its first two polls.
    ``run-normally`` then runs the command locally (or finishes with the
    scripted ``exit_status``); ``hang-forever`` stays running until cancelled.
    """

    def __init__(self, scenario: ExecutorScenario, tick: float = 1.0, local: LocalExecutor | None = None):
        self.scenario = scenario
        self.tick = tick
        self.local = local or LocalExecutor()
        self._lock = threading.Lock()
        self._submissions = 0

    def submit(self, plan: RunPlan) -> _SimJob:
        with self._lock:
            step = self.scenario.step(self._submissions)
            self._submissions += 1
        if step.outcome == "refuse-submission":
            raise SubmissionRefused("scenario refuses submission")
        return _SimJob(step, plan)

    def poll(self, job: _SimJob) -> Queued | Running | Finished:
        job.polls += 1
        if job.cancelled:
            return Finished(None)
        if job.polls * self.tick < job.step.queue_delay:
            return Queued()
        if job.step.outcome == "hang-forever":
            return Running()
        if job.step.exit_status is not None:
            return Finished(job.step.exit_status)
        if job.proc is None:
            job.proc = self.local.submit(job.plan)
        return self.local.poll(job.proc)

    def cancel(self, job: _SimJob) -> None:
        job.cancelled = True
        if job.proc is not None:
            self.local.cancel(job.proc)

    def elapsed_override(self, job: _SimJob) -> float | None:
        return job.step.elapsed


# --------------------------------------------------------------------------- planning

_plan_lock = threading.Lock()
_last_stamp = None


def _fresh_stamp():
    # strictly increasing across plan() calls in this process
    global _last_stamp
    with _plan_lock:
        now = utcnow()
        if _last_stamp is not None and now <= _last_stamp:
            now = _last_stamp + timedelta(microseconds=1)
        _last_stamp = now
        return now


def make_run_id(spec_name: str, assignment: dict[str, str], submitted: str, seq: int) -> str:
    canonical = json.dumps([spec_name, sorted(assignment.items()), submitted, seq], separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def plan(spec: BenchmarkSpec, configs: Sequence[Configuration], machine_label: str = "") -> list[RunPlan]:
    """Create one fresh run directory per configuration under ``workdir_root``."""
    if not configs:
        return []
    root = Path(spec.workdir_root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PlanningError(f"workdir_root {root} is not writable: {exc}") from exc
    if not os.access(root, os.W_OK):
        raise PlanningError(f"workdir_root {root} is not writable")

    stamp = _fresh_stamp()
    submitted = format_ts(stamp)
    dir_stamp = stamp.strftime("%Y%m%dT%H%M%SZ")
    spec_text = serialize_spec(spec)
    plans = []
    for seq, config in enumerate(configs):
        run_id = make_run_id(spec.name, config.assignment, submitted, seq)
        run_dir = root / f"{dir_stamp}-{seq:04d}-{run_id[:8]}"
        try:
            run_dir.mkdir(parents=False, exist_ok=False)
        except FileExistsError:
            raise PlanningError(f"run directory {run_dir} already exists") from None
        except OSError as exc:
            raise PlanningError(f"cannot create {run_dir}: {exc}") from exc
        command = render_command(spec, config)
        (run_dir / "command.txt").write_text(command + "\n", encoding="utf-8")
        (run_dir / "spec.bk").write_text(spec_text, encoding="utf-8")
        plans.append(
            RunPlan(run_id, spec.name, config, command, run_dir, spec.timeout_seconds, spec, seq, machine_label)
        )
    return plans


# --------------------------------------------------------------------------- execution


class MetricError(Exception):
    pass


def _lookup(doc, key_path: str):
    cur = doc
    for key in key_path.split("."):
        if isinstance(cur, dict) and key in cur:
            cur = cur[key]
        elif isinstance(cur, list) and key.isdigit() and int(key) < len(cur):
            cur = cur[int(key)]
        else:
            raise MetricError(f"key path {key_path!r} not found")
    if isinstance(cur, bool) or not isinstance(cur, (int, float)):
        raise MetricError(f"value at {key_path!r} is not a number: {cur!r}")
    return float(cur)


def extract_metrics(
    metrics: Sequence[MetricSource], run_dir: Path, elapsed: float, exit_status: int
) -> dict[str, float]:
    out = {}
    for m in metrics:
        if m.kind == "elapsed":
            out[m.name] = elapsed
        elif m.kind == "exitstatus":
            out[m.name] = float(exit_status)
        else:
            path = run_dir / m.path
            try:
                with open(path, encoding="utf-8") as fh:
                    doc = json.load(fh)
            except (OSError, ValueError) as exc:
                raise MetricError(f"metric {m.name}: cannot read {m.path}: {exc}") from None
            try:
                out[m.name] = _lookup(doc, m.key_path)
            except MetricError as exc:
                raise MetricError(f"metric {m.name}: {exc} in {m.path}") from None
    return out


def _touch_logs(run_dir: Path) -> None:
    for name in ("stdout.log", "stderr.log"):
        (run_dir / name).touch(exist_ok=True)


def execute(
    plan: RunPlan,
    executor: Executor,
    store: Store | None = None,
    machine_label: str | None = None,
    poll_interval: float = POLL_INTERVAL,
) -> RunRecord:
    """Run one plan to completion and return (and store) its RunRecord.

    The returned ``state`` must be checked by the caller; a record is produced
    for every outcome, including refusals and timeouts.
    """
    _touch_logs(plan.run_dir)
    started = utcnow()
    t0 = time.monotonic()
    exit_status = None
    harness_error = None
    handle = None
    try:
        handle = executor.submit(plan)
    except SubmissionRefused as exc:
        state = "submit-error"
        harness_error = f"submission refused: {exc}"
    else:
        state = None
        while True:
            status = executor.poll(handle)
            if isinstance(status, Finished):
                exit_status = status.exit_status
                break
            if time.monotonic() - t0 > plan.timeout_seconds:
                executor.cancel(handle)
                state = "timeout"
                harness_error = f"timed out after {plan.timeout_seconds} s"
                break
            time.sleep(poll_interval)
        if state is None and exit_status is None:
            state = "timeout"
            harness_error = "job cancelled before reporting an exit status"

    elapsed = time.monotonic() - t0
    override = getattr(executor, "elapsed_override", None)
    if handle is not None and override is not None and override(handle) is not None:
        elapsed = override(handle)

    metrics: dict[str, float] = {}
    if state is None:
        if exit_status == 0:
            try:
                metrics = extract_metrics(plan.spec.metrics, plan.run_dir, elapsed, exit_status)
                state = "succeeded"
            except MetricError as exc:
                state = "failed"
                harness_error = str(exc)
        else:
            state = "failed"
    if state == "timeout":
        exit_status = None

    if harness_error:
        (plan.run_dir / "harness-error.txt").write_text(harness_error + "\n", encoding="utf-8")

    record = RunRecord(
        run_id=plan.run_id,
        spec_name=plan.spec_name,
        params=dict(plan.configuration.assignment),
        started_at=started,
        finished_at=started + timedelta(seconds=round(elapsed, 6)),
        elapsed_seconds=elapsed,
        state=state,
        exit_status=exit_status,
        metrics=metrics,
        artifact_dir=str(plan.run_dir),
        machine_label=plan.machine_label if machine_label is None else machine_label,
    )
    (plan.run_dir / "record.json").write_text(json.dumps(record.to_json(), indent=2) + "\n", encoding="utf-8")
    if store is not None:
        store.append(record)
    log.info("run %s %s: %s (exit %s)", plan.run_id, plan.configuration.label(), state, exit_status)
    return record


def execute_all(
    plans: Sequence[RunPlan],
    executor: Executor,
    store: Store | None = None,
    machine_label: str | None = None,
    max_parallel: int = 1,
    poll_interval: float = POLL_INTERVAL,
) -> list[RunRecord]:
    """Execute ``plans`` with at most ``max_parallel`` in flight; results keep plan order."""
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")
    if max_parallel == 1 or len(plans) <= 1:
        return [execute(p, executor, store, machine_label, poll_interval) for p in plans]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures = [pool.submit(execute, p, executor, store, machine_label, poll_interval) for p in plans]
        return [f.result() for f in futures]
