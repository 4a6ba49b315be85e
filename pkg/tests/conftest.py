from __future__ import annotations

import json
import shlex
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from benchkeeper.records import RunRecord

TESTS = Path(__file__).parent
if str(TESTS) not in sys.path:
    sys.path.insert(0, str(TESTS))

PY = shlex.quote(sys.executable)
WORKLOAD = f"{PY} -m benchkeeper.workload"

BUILD_MATRIX_SPEC = """\
# build matrix: GPU code is only tested on Debian
benchmark "build-matrix"
param distro = rocky9, debian12
param mpi = mpich, openmpi
param device = cpu, gpu
exclude device=gpu && distro=rocky9
command = "echo {distro} {mpi} {device}"
metric elapsed from elapsed
estimate_seconds = 10
"""

T0 = datetime(2025, 9, 1, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def build_matrix_text():
    return BUILD_MATRIX_SPEC


def make_record(i: int, *, params=None, state="succeeded", exit_status=0, metrics=None, start=None,
                elapsed=10.0, spec_name="bench", machine="m1", run_id=None):
    start = start or (T0 + timedelta(days=i))
    if state in ("timeout", "submit-error"):
        exit_status = None
    return RunRecord(
        run_id=run_id or f"{i:016x}",
        spec_name=spec_name,
        params=dict(params or {"nodes": "1"}),
        started_at=start,
        finished_at=start + timedelta(seconds=elapsed),
        elapsed_seconds=elapsed,
        state=state,
        exit_status=exit_status,
        metrics=dict(metrics if metrics is not None else {"elapsed": elapsed}),
        artifact_dir=f"/runs/{i}",
        machine_label=machine,
    )


def write_spec(tmp_path: Path, body: str, name="bench.bk") -> Path:
    path = tmp_path / name
    path.write_text(body)
    return path


def write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc))
    return path


# --------------------------------------------------------------------------- acceptance summary

_criteria: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[report.nodeid.split("::")[-1]] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        number, *title = name[len("test_criterion_"):].split("_")
        terminalreporter.write_line(f"{_criteria[name]}  criterion {number}: {' '.join(title)}")
