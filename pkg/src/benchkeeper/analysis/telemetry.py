"""Per-node job telemetry (GPU utilization and memory series) and anomaly detectors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .findings import Finding


@dataclass
class NodeTelemetry:
    node_id: str
    gpu_util: np.ndarray
    mem_bytes: np.ndarray
    node_mem_capacity_bytes: float


@dataclass
class JobTelemetry:
    duration_seconds: float
    sample_period_seconds: float
    nodes: list[NodeTelemetry]
    start_seconds: float = 0.0  # offset of sample 0; findings report times relative to it

    def __post_init__(self):
        if not self.duration_seconds > 0 or not self.sample_period_seconds > 0:
            raise ValueError("duration and sample period must be positive")
        m = self.n_samples
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        for node in self.nodes:
            node.gpu_util = np.asarray(node.gpu_util, dtype=float)
            node.mem_bytes = np.asarray(node.mem_bytes, dtype=float)
            if node.gpu_util.shape != (m,) or node.mem_bytes.shape != (m,):
                raise ValueError(
                    f"node {node.node_id}: series length must be floor(duration/period) = {m}, "
                    f"got {node.gpu_util.shape[0]} / {node.mem_bytes.shape[0]}"
                )
            if np.any(node.gpu_util < 0) or np.any(node.gpu_util > 1):
                raise ValueError(f"node {node.node_id}: utilization outside [0, 1]")
            if np.any(node.mem_bytes < 0):
                raise ValueError(f"node {node.node_id}: negative memory")
            if not node.node_mem_capacity_bytes > 0:
                raise ValueError(f"node {node.node_id}: capacity must be positive")

    @property
    def n_samples(self) -> int:
        return math.floor(self.duration_seconds / self.sample_period_seconds)

    @classmethod
    def from_json(cls, doc: dict) -> JobTelemetry:
        nodes = [
            NodeTelemetry(n["node_id"], n["gpu_util"], n["mem_bytes"], float(n["node_mem_capacity_bytes"]))
            for n in doc["nodes"]
        ]
        return cls(
            float(doc["duration_seconds"]),
            float(doc["sample_period_seconds"]),
            nodes,
            float(doc.get("start_seconds", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> JobTelemetry:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {
            "duration_seconds": self.duration_seconds,
            "sample_period_seconds": self.sample_period_seconds,
            "start_seconds": self.start_seconds,
            "nodes": [
                {
                    "node_id": n.node_id,
                    "gpu_util": n.gpu_util.tolist(),
                    "mem_bytes": n.mem_bytes.tolist(),
                    "node_mem_capacity_bytes": n.node_mem_capacity_bytes,
                }
                for n in self.nodes
            ],
        }


def _idle_from(util: np.ndarray, u_idle: float) -> int:
    """First sample index from which utilization stays below ``u_idle``; len(util) if none."""
    idx = len(util)
    for i in range(len(util) - 1, -1, -1):
        if util[i] < u_idle:
            idx = i
        else:
            break
    return idx


def detect_idle_tail(
    t: JobTelemetry,
    u_idle: float = 0.05,
    u_busy: float = 0.5,
    idle_fraction: float = 0.75,
    tail_fraction_max: float = 0.9,
) -> Finding:
    """Find the earliest time most GPUs are idle for good while a straggler stays busy."""
    if len(t.nodes) < 2:
        raise ValueError("idle-tail detection needs at least two nodes")
    m = t.n_samples
    idle_from = {n.node_id: _idle_from(n.gpu_util, u_idle) for n in t.nodes}
    need = idle_fraction * len(t.nodes)
    for s in range(m):
        idle = [n.node_id for n in t.nodes if idle_from[n.node_id] <= s]
        if len(idle) < need:
            continue
        busy = [n.node_id for n in t.nodes if float(np.mean(n.gpu_util[s:])) >= u_busy]
        if not busy:
            continue
        t_star = s * t.sample_period_seconds
        evidence = {
            "t_star_seconds": t_star,
            "t_star_fraction": t_star / t.duration_seconds,
            "idle_nodes": idle,
            "busy_nodes": busy,
            "u_idle": u_idle,
            "u_busy": u_busy,
            "idle_fraction": idle_fraction,
            "tail_fraction_max": tail_fraction_max,
        }
        if t_star / t.duration_seconds <= tail_fraction_max:
            return Finding("idle-tail", evidence, severity=1.0 - t_star / t.duration_seconds)
        return Finding("none", evidence, severity=0.0)
    return Finding("none", {"u_idle": u_idle, "u_busy": u_busy, "idle_fraction": idle_fraction}, severity=0.0)


def detect_initial_memory(t: JobTelemetry, threshold_fraction: float = 0.25, window_samples: int = 3) -> Finding:
    """Flag nodes whose memory is already high over the first few samples."""
    if window_samples < 1:
        raise ValueError("window_samples must be >= 1")
    flagged = []
    fractions = {}
    for node in t.nodes:
        window = node.mem_bytes[:window_samples]
        if window.size == 0:
            continue
        frac = float(np.mean(window)) / node.node_mem_capacity_bytes
        fractions[node.node_id] = frac
        if frac > threshold_fraction:
            flagged.append(node.node_id)
    evidence = {
        "flagged_nodes": flagged,
        "initial_fraction": fractions,
        "threshold_fraction": threshold_fraction,
        "window_samples": window_samples,
    }
    if flagged:
        return Finding("high-initial-memory", evidence, severity=max(fractions[n] for n in flagged))
    return Finding("none", evidence, severity=0.0)


def synthetic_idle_tail(
    n_nodes: int = 8,
    duration_minutes: float = 120,
    idle_from_minute: float = 75,
    period_seconds: float = 60,
    busy_nodes: Sequence[int] = (0,),
    busy_util: float = 0.9,
    capacity_bytes: float = 512e9,
) -> JobTelemetry:
    """Telemetry where all but ``busy_nodes`` drop to zero utilization at ``idle_from_minute``."""
    m = math.floor(duration_minutes * 60 / period_seconds)
    times = np.arange(m) * period_seconds
    nodes = []
    for i in range(n_nodes):
        util = np.full(m, busy_util)
        if i not in busy_nodes:
            util[times >= idle_from_minute * 60] = 0.0
        nodes.append(NodeTelemetry(f"node{i:02d}", util, np.full(m, 0.05 * capacity_bytes), capacity_bytes))
    return JobTelemetry(duration_minutes * 60, period_seconds, nodes)
