"""Scaling tables, step detection at known events, and change-point search."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from ..records import RunRecord
from .findings import Finding, InsufficientDataError

CHANGE_POINT_MARGIN = 0.2
# relative slack under which two SSE totals count as a tie
_TIE_RTOL = 1e-12


def median(values: Iterable[float]) -> float:
    """Median of sorted values; even counts average the middle two."""
    xs = sorted(values)
    if not xs:
        raise ValueError("median of an empty sequence")
    mid = len(xs) // 2
    if len(xs) % 2:
        return float(xs[mid])
    return (float(xs[mid - 1]) + float(xs[mid])) / 2.0


def metric_value(record: RunRecord, metric: str) -> float | None:
    """Look up ``metric``; the record's own wall clock stands in for ``elapsed``."""
    if metric in record.metrics:
        return record.metrics[metric]
    if metric in ("elapsed", "elapsed_seconds"):
        return record.elapsed_seconds
    return None


# --------------------------------------------------------------------------- scaling


@dataclass
class ScalingRow:
    p: int
    n_runs: int
    median_elapsed_seconds: float
    median_energy_joules: float | None
    speedup: float
    efficiency: float


def scaling_table(
    records: Sequence[RunRecord],
    metric: str,
    node_param: str,
    p_ref: int | None = None,
    energy_metric: str | None = None,
) -> list[ScalingRow]:
    """Strong-scaling medians per node count; ``p_ref`` defaults to the smallest p."""
    by_p: dict[int, list[RunRecord]] = defaultdict(list)
    for rec in records:
        if not rec.succeeded:
            raise ValueError(f"run {rec.run_id} did not succeed")
        if node_param not in rec.params:
            raise ValueError(f"run {rec.run_id} lacks param {node_param!r}")
        if metric_value(rec, metric) is None:
            raise ValueError(f"run {rec.run_id} lacks metric {metric!r}")
        by_p[int(rec.params[node_param])].append(rec)
    if not by_p:
        raise ValueError("no records")
    if p_ref is None:
        p_ref = min(by_p)
    if p_ref not in by_p:
        raise ValueError(f"p_ref={p_ref} is not among the node counts {sorted(by_p)}")

    medians = {p: median(metric_value(r, metric) for r in recs) for p, recs in by_p.items()}
    rows = []
    for p in sorted(by_p):
        energies = [r.metrics[energy_metric] for r in by_p[p] if energy_metric and energy_metric in r.metrics]
        if p == p_ref:
            speedup = efficiency = 1.0
        else:
            speedup = medians[p_ref] / medians[p]
            efficiency = speedup * p_ref / p
        rows.append(
            ScalingRow(p, len(by_p[p]), medians[p], median(energies) if energies else None, speedup, efficiency)
        )
    return rows


def format_scaling_table(rows: Sequence[ScalingRow]) -> str:
    lines = [f"{'p':>6} {'runs':>5} {'median_elapsed':>16} {'median_energy':>16} {'speedup':>10} {'efficiency':>10}"]
    for r in rows:
        energy = f"{r.median_energy_joules:16.6f}" if r.median_energy_joules is not None else f"{'-':>16}"
        lines.append(
            f"{r.p:>6} {r.n_runs:>5} {r.median_elapsed_seconds:16.6f} {energy} {r.speedup:10.6f} {r.efficiency:10.6f}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- series


@dataclass
class MetricSeries:
    times: list[datetime]
    values: list[float]

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("series timestamps must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("series values must be finite")

    def __len__(self) -> int:
        return len(self.values)


def series_by_configuration(records: Sequence[RunRecord], metric: str) -> dict[tuple, MetricSeries]:
    """Succeeded runs grouped by their param assignment, in time order."""
    groups: dict[tuple, list[RunRecord]] = defaultdict(list)
    for rec in records:
        if rec.succeeded and metric_value(rec, metric) is not None:
            groups[tuple(sorted(rec.params.items()))].append(rec)
    out = {}
    for key in sorted(groups):
        recs = sorted(groups[key], key=lambda r: (r.started_at, r.run_id))
        out[key] = MetricSeries([r.started_at for r in recs], [metric_value(r, metric) for r in recs])
    return out


def detect_step(series: MetricSeries, event_time: datetime, delta: float = 0.05, min_samples_per_side: int = 3) -> Finding:
    """Compare medians before and at/after ``event_time``; higher is worse."""
    before = [v for t, v in zip(series.times, series.values) if t < event_time]
    after = [v for t, v in zip(series.times, series.values) if t >= event_time]
    for side, vals in (("before", before), ("after", after)):
        if len(vals) < min_samples_per_side:
            raise InsufficientDataError(
                f"{len(vals)} samples {side} the event, need {min_samples_per_side}"
            )
    m_before = median(before)
    m_after = median(after)
    if m_after > m_before * (1 + delta):
        kind = "regression"
    elif m_after < m_before * (1 - delta):
        kind = "improvement"
    else:
        kind = "none"
    if m_before == 0:
        severity = 1.0 if m_after == 0 else math.inf
    else:
        severity = m_after / m_before
    evidence = {
        "median_before": m_before,
        "median_after": m_after,
        "n_before": len(before),
        "n_after": len(after),
        "delta": delta,
    }
    return Finding(kind, evidence, severity)


def segment_sse(values: Sequence[float]) -> float:
    a = np.asarray(values, dtype=float)
    return float(np.sum((a - a.mean()) ** 2))


def find_change_point(values: Sequence[float], margin: float = CHANGE_POINT_MARGIN) -> int | None:
    """Best two-segment split: the prefix length k in [2, n-2] minimizing total SSE.

    Returns None unless the split improves on the one-segment SSE by at least
    ``margin`` (relative). Ties go to the smallest k.
    """
    y = np.asarray(values, dtype=float)
    n = len(y)
    if n < 4:
        raise InsufficientDataError(f"change-point search needs >= 4 points, got {n}")
    total = segment_sse(y)
    if total == 0:
        return None
    best_k, best = None, math.inf
    for k in range(2, n - 1):
        sse = segment_sse(y[:k]) + segment_sse(y[k:])
        if sse < best - _TIE_RTOL * total:
            best_k, best = k, sse
    if (total - best) / total >= margin:
        return best_k
    return None
