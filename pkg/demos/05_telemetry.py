"""
Job telemetry anomalies
=======================

An 8-node, two-hour job in which seven GPUs go idle at minute 75 while one
node keeps working: a classic load-imbalance tail. A second job starts with one
node already half full of memory.
"""
import numpy as np

from benchkeeper.analysis import JobTelemetry, NodeTelemetry, detect_idle_tail, detect_initial_memory, synthetic_idle_tail

job = synthetic_idle_tail(n_nodes=8, duration_minutes=120, idle_from_minute=75)
f = detect_idle_tail(job)
print(f"{f.kind}: t* = {f.evidence['t_star_seconds'] / 60:.0f} min, busy = {f.evidence['busy_nodes']}")

# crude text heat map: one row per node, '#' busy, '.' idle, 5-minute columns
for node in job.nodes:
    print(f"{node.node_id} " + "".join("#" if u > 0.5 else "." for u in node.gpu_util[::5]))

cap, m = 512e9, 60
mem = [np.full(m, 0.03 * cap) for _ in range(4)]
mem[2][:] = 0.5 * cap
job2 = JobTelemetry(m * 60.0, 60.0, [NodeTelemetry(f"n{i}", np.full(m, 0.8), mb, cap) for i, mb in enumerate(mem)])
g = detect_initial_memory(job2)
print(f"{g.kind}: {g.evidence['flagged_nodes']} ({g.severity:.0%} of capacity)")
