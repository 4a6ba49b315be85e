"""
Running a matrix against a simulated scheduler
==============================================

The simulated executor stands in for a batch system: jobs sit in a queue for a
few polls, then either run the real command, hang, or are refused. Every
outcome ends up as a record in the append-only store.
"""
import sys
import tempfile
from pathlib import Path

from benchkeeper import ExecutorScenario, ScenarioStep, SimulatedExecutor, Store, execute_all, expand, parse_spec, plan

work = Path(tempfile.mkdtemp(prefix="bk-demo-"))

spec = parse_spec(f"""
benchmark "sim"
param nodes = 1, 2, 4
command = "{sys.executable} -m benchkeeper.workload --generate 7 {{nodes}} guaranteed-convergent"
metric elapsed from elapsed
metric iterations from file:metrics.json:iterations
estimate_seconds = 1
timeout_factor = 2
workdir_root = {work / 'runs'}
""")

scenario = ExecutorScenario([
    ScenarioStep(queue_delay=3),               # queued for three polls, then runs normally
    ScenarioStep(outcome="refuse-submission"),
    ScenarioStep(outcome="hang-forever"),      # killed at the 2 s timeout
])
store = Store(work / "store")
records = execute_all(plan(spec, expand(spec), "laptop"), SimulatedExecutor(scenario), store)

for r in records:
    print(f"nodes={r.params['nodes']}: {r.state:<12} exit={r.exit_status} metrics={r.metrics}")
print(f"store holds {len(store.query())} records under {store.root}")

# each run directory keeps everything needed for a post-mortem
for p in sorted((work / "runs").iterdir()):
    print(p.name, sorted(f.name for f in p.iterdir()))
