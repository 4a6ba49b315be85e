"""``bk``: expand, run, report, detect, events.

Exit statuses: 0 success / no regression, 1 operational failure or regression
found, 2 usage or validation error (raised before any side effect).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._time import format_ts, parse_ts
from .analysis import (
    Finding,
    InsufficientDataError,
    detect_step,
    find_change_point,
    format_scaling_table,
    render_report,
    scaling_table,
    series_by_configuration,
)
from .orchestrator import (
    ExecutorScenario,
    LocalExecutor,
    PlanningError,
    SimulatedExecutor,
    execute_all,
    plan,
)
from .records import EventRecord
from .specmatrix import SpecError, expand, format_configurations, load_spec
from .store import Query, Store, StoreError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("benchkeeper")


class UsageError(Exception):
    pass


def _err(message: str) -> None:
    print(f"bk: {message}", file=sys.stderr)


def _store_root(args) -> Path:
    root = args.store or os.environ.get("BK_STORE")
    if not root:
        raise UsageError("no store root: pass --store or set BK_STORE")
    return Path(root)


def _open_store(args, create: bool) -> Store:
    root = _store_root(args)
    if not create and not root.is_dir():
        raise UsageError(f"store root {root} does not exist")
    try:
        return Store(root, create=create)
    except StoreError as exc:
        raise UsageError(str(exc)) from None


def _load_spec(path: str):
    try:
        return load_spec(path)
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc.strerror or exc}") from None
    except SpecError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _timestamp(text: str):
    try:
        return parse_ts(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------- subcommands


def cmd_expand(args) -> int:
    spec = _load_spec(args.spec)
    sys.stdout.write(format_configurations(expand(spec)))
    return EXIT_OK


def _make_executor(selection: str):
    if selection == "local":
        return LocalExecutor()
    if selection.startswith("simulated:"):
        path = selection[len("simulated:") :]
        try:
            return SimulatedExecutor(ExecutorScenario.load(path))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad scenario {path}: {exc}") from None
    raise UsageError(f"unknown executor {selection!r}; use 'local' or 'simulated:<scenario.json>'")


def cmd_run(args) -> int:
    spec = _load_spec(args.spec)
    if args.max_parallel < 1:
        raise UsageError("--max-parallel must be >= 1")
    executor = _make_executor(args.executor)
    store = _open_store(args, create=True)
    try:
        store.check_writable()
    except StoreError as exc:
        raise UsageError(str(exc)) from None

    configs = expand(spec)
    try:
        plans = plan(spec, configs, args.machine)
    except PlanningError as exc:
        raise UsageError(str(exc)) from None
    records = execute_all(plans, executor, store, max_parallel=args.max_parallel)
    failed = 0
    for rec in records:
        print(f"bk: {rec.run_id} {rec.state} exit={rec.exit_status} {rec.artifact_dir}", file=sys.stderr)
        failed += not rec.succeeded
    if failed:
        _err(f"{failed} of {len(records)} runs did not succeed")
        return EXIT_FAIL
    return EXIT_OK


def cmd_report(args) -> int:
    store = _open_store(args, create=False)
    records = [
        r
        for r in store.query(Query(spec_name=args.spec_name, machine_label=args.machine))
        if args.node_param in r.params
    ]
    ok = [r for r in records if r.succeeded]
    if not ok:
        _err(f"no succeeded runs of {args.spec_name!r} with param {args.node_param!r}")
        return EXIT_FAIL
    try:
        rows = scaling_table(ok, args.metric, args.node_param, args.p_ref, args.energy_metric)
        csv_text, svg_text = render_report(
            records, store.list_events(machine_label=args.machine), args.node_param, args.metric, args.energy_metric
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_bytes(csv_text.encode("utf-8"))
    (out / "report.svg").write_bytes(svg_text.encode("utf-8"))
    sys.stdout.write(format_scaling_table(rows))
    return EXIT_OK


def cmd_detect(args) -> int:
    store = _open_store(args, create=False)
    event_time = _timestamp(args.event) if args.event else None
    records = store.query(Query(spec_name=args.spec_name, machine_label=args.machine, states=frozenset({"succeeded"})))
    groups = series_by_configuration(records, args.metric)
    if not groups:
        raise UsageError(f"no succeeded runs of {args.spec_name!r} carry metric {args.metric!r}")

    findings = []
    for key, series in groups.items():
        label = ",".join(f"{k}={v}" for k, v in key) or "(empty configuration)"
        try:
            if event_time is not None:
                finding = detect_step(series, event_time, args.delta, args.min_samples)
            else:
                k = find_change_point(series.values, args.margin)
                if k is None:
                    finding = Finding("none", {"change_point_index": None}, 1.0)
                else:
                    finding = detect_step(series, series.times[k], args.delta, 1)
                    finding.evidence["change_point_index"] = k
                    finding.evidence["change_point_time"] = format_ts(series.times[k])
        except InsufficientDataError as exc:
            raise UsageError(f"configuration {label}: {exc}") from None
        findings.append((key, finding))

    regressions = 0
    for key, finding in findings:
        doc = {"configuration": dict(key), **finding.to_json()}
        print(json.dumps(doc, sort_keys=True))
        regressions += finding.kind == "regression"
    return EXIT_FAIL if regressions else EXIT_OK


def cmd_events(args) -> int:
    if args.action == "add":
        ts = _timestamp(args.timestamp)
        if not args.label:
            raise UsageError("--label must be non-empty")
        store = _open_store(args, create=True)
        store.append_event(EventRecord(ts, args.label, args.machine or ""))
        return EXIT_OK
    start = _timestamp(args.since) if args.since else None
    end = _timestamp(args.until) if args.until else None
    root = _store_root(args)
    if not root.exists():
        return EXIT_OK
    store = Store(root, create=False)
    try:
        events = store.list_events(start, end, args.machine)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for ev in events:
        print(json.dumps(ev.to_json(), sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bk", description="continuous-benchmarking harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def store_opt(p):
        p.add_argument("--store", help="store root (default: $BK_STORE)")

    p = sub.add_parser("expand", help="print the run matrix of a spec")
    p.add_argument("spec")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("run", help="plan, execute and store every configuration")
    p.add_argument("spec")
    store_opt(p)
    p.add_argument("--machine", default="local", help="machine label stored with each record")
    p.add_argument("--max-parallel", type=int, default=1)
    p.add_argument("--executor", default="local", help="'local' or 'simulated:<scenario.json>'")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="scaling table plus report.csv / report.svg")
    store_opt(p)
    p.add_argument("--spec-name", required=True)
    p.add_argument("--metric", default="elapsed")
    p.add_argument("--energy-metric", default=None)
    p.add_argument("--node-param", default="nodes")
    p.add_argument("--p-ref", type=int, default=None)
    p.add_argument("--machine", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("detect", help="regression findings as JSON lines")
    store_opt(p)
    p.add_argument("--spec-name", required=True)
    p.add_argument("--metric", default="elapsed")
    p.add_argument("--machine", default=None)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--event", metavar="TIMESTAMP")
    mode.add_argument("--auto", action="store_true")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--min-samples", type=int, default=3)
    p.add_argument("--margin", type=float, default=0.2)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("events", help="record or list machine events")
    p.add_argument("action", choices=("add", "list"))
    store_opt(p)
    p.add_argument("--timestamp")
    p.add_argument("--label")
    p.add_argument("--machine", default=None)
    p.add_argument("--from", dest="since", metavar="TIMESTAMP", help="list: inclusive lower bound")
    p.add_argument("--to", dest="until", metavar="TIMESTAMP", help="list: exclusive upper bound")
    p.set_defaults(func=cmd_events)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "events" and args.action == "add" and (not args.timestamp or args.label is None):
        _err("events add needs --timestamp and --label")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except StoreError as exc:
        _err(str(exc))
        return EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
