"""Persisted value types: run records and machine events."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

from ._time import format_ts, parse_ts

STATES = ("succeeded", "failed", "timeout", "submit-error")

RECORD_FIELDS = (
    "run_id",
    "spec_name",
    "params",
    "started_at",
    "finished_at",
    "elapsed_seconds",
    "state",
    "exit_status",
    "metrics",
    "artifact_dir",
    "machine_label",
)


def _dec(x: float) -> float:
    # decimals are stored with at most 6 fractional digits
    return round(float(x), 6)


@dataclass
class RunRecord:
    run_id: str
    spec_name: str
    params: dict[str, str]
    started_at: datetime
    finished_at: datetime
    elapsed_seconds: float
    state: str
    exit_status: int | None
    metrics: dict[str, float] = field(default_factory=dict)
    artifact_dir: str = ""
    machine_label: str = ""

    def __post_init__(self):
        self.elapsed_seconds = _dec(self.elapsed_seconds)
        self.metrics = {k: _dec(v) for k, v in self.metrics.items()}
        self.validate()

    def validate(self) -> None:
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if self.state == "succeeded" and self.exit_status != 0:
            raise ValueError("succeeded record must carry exit status 0")
        if self.state in ("timeout", "submit-error") and self.exit_status is not None:
            raise ValueError(f"{self.state} record must not carry an exit status")
        if self.state == "failed" and self.exit_status is None:
            raise ValueError("failed record must carry an exit status")
        if self.finished_at < self.started_at:
            raise ValueError("finished_at precedes started_at")
        if self.elapsed_seconds < 0:
            raise ValueError("elapsed_seconds is negative")

    @property
    def succeeded(self) -> bool:
        return self.state == "succeeded"

    def to_json(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "spec_name": self.spec_name,
            "params": dict(self.params),
            "started_at": format_ts(self.started_at),
            "finished_at": format_ts(self.finished_at),
            "elapsed_seconds": self.elapsed_seconds,
            "state": self.state,
            "exit_status": self.exit_status,
            "metrics": dict(self.metrics),
            "artifact_dir": self.artifact_dir,
            "machine_label": self.machine_label,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> RunRecord:
        if not isinstance(obj, dict) or set(obj) != set(RECORD_FIELDS):
            raise ValueError("record keys do not match the RunRecord fields")
        return cls(
            run_id=obj["run_id"],
            spec_name=obj["spec_name"],
            params={str(k): str(v) for k, v in obj["params"].items()},
            started_at=parse_ts(obj["started_at"]),
            finished_at=parse_ts(obj["finished_at"]),
            elapsed_seconds=obj["elapsed_seconds"],
            state=obj["state"],
            exit_status=obj["exit_status"],
            metrics={str(k): float(v) for k, v in obj["metrics"].items()},
            artifact_dir=obj["artifact_dir"],
            machine_label=obj["machine_label"],
        )


@dataclass
class EventRecord:
    """A machine-side event, e.g. a maintenance window."""

    timestamp: datetime
    label: str
    machine_label: str = ""

    def __post_init__(self):
        if not self.label:
            raise ValueError("event label must be non-empty")

    def to_json(self) -> dict[str, Any]:
        return {"timestamp": format_ts(self.timestamp), "label": self.label, "machine_label": self.machine_label}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> EventRecord:
        if not isinstance(obj, dict) or set(obj) != {"timestamp", "label", "machine_label"}:
            raise ValueError("event keys do not match the EventRecord fields")
        return cls(parse_ts(obj["timestamp"]), obj["label"], obj["machine_label"])
