"""
Strong-scaling report
=====================

Stored runs at 1, 2, 4 and 8 nodes become a scaling table plus a CSV and an
SVG scatter: crosses for elapsed time, circles for energy, a dashed line per
logged event, and lighter colors for more recent runs.
"""
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from benchkeeper import EventRecord, RunRecord
from benchkeeper.analysis import format_scaling_table, render_report, scaling_table

rng = np.random.default_rng(1)
t0 = datetime(2025, 8, 1, tzinfo=timezone.utc)
records = []
for week in range(6):
    slowdown = 1.08 if week >= 3 else 1.0
    for p in (1, 2, 4, 8):
        t = 1000 / p ** 0.9 * slowdown * (1 + rng.normal(0, 0.01))
        start = t0 + timedelta(weeks=week, hours=p)
        records.append(RunRecord(
            run_id=f"{week:02d}{p:02d}".ljust(16, "0"), spec_name="scaling", params={"nodes": str(p)},
            started_at=start, finished_at=start + timedelta(seconds=t), elapsed_seconds=t,
            state="succeeded", exit_status=0, metrics={"elapsed": t, "energy": 350.0 * p * t},
            artifact_dir="-", machine_label="booster",
        ))
events = [EventRecord(t0 + timedelta(weeks=2, days=4), "system update", "booster")]

print(format_scaling_table(scaling_table(records, "elapsed", "nodes", energy_metric="energy")), end="")
csv_text, svg_text = render_report(records, events, "nodes", "elapsed", "energy")
out = Path(tempfile.mkdtemp(prefix="bk-report-"))
(out / "report.csv").write_text(csv_text, newline="")
(out / "report.svg").write_text(svg_text)
print(f"wrote {out}/report.csv ({len(records)} rows) and report.svg")
