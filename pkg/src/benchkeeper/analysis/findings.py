from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

KINDS = ("regression", "improvement", "idle-tail", "high-initial-memory", "none")


@dataclass
class Finding:
    kind: str
    evidence: dict[str, Any] = field(default_factory=dict)
    severity: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown finding kind {self.kind!r}")

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "severity": self.severity, "evidence": self.evidence}


class InsufficientDataError(ValueError):
    pass
