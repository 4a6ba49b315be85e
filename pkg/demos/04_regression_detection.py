"""
Spotting a slowdown after maintenance
=====================================

A weekly benchmark drifts around 100 s until a machine update, after which it
sits around 110 s. With the update logged as an event, the before/after
medians give the verdict directly; without it, a two-segment least-squares
split finds the shift on its own.
"""
from datetime import datetime, timedelta, timezone

import numpy as np

from benchkeeper.analysis import MetricSeries, detect_step, find_change_point

rng = np.random.default_rng(0)
t0 = datetime(2025, 7, 1, tzinfo=timezone.utc)
times = [t0 + timedelta(weeks=i) for i in range(16)]
values = list(100 + rng.normal(0, 1, 8)) + list(110 + rng.normal(0, 1, 8))
series = MetricSeries(times, values)

update = times[8] - timedelta(days=2)
finding = detect_step(series, update)
print(f"{finding.kind}: severity {finding.severity:.3f}")
print({k: round(v, 2) for k, v in finding.evidence.items()})

k = find_change_point(values)
print(f"change point at sample {k} ({times[k]:%Y-%m-%d})")

# a constant history has nothing to split
print(find_change_point([100.0] * 16))
