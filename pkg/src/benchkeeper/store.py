"""Append-only JSON Lines store for run records and machine events.

Layout under the store root: ``records.jsonl``, ``events.jsonl`` and ``lock``.
Writers serialize on an advisory ``flock`` of ``lock``; readers never lock and
see a prefix of the file.
"""
from __future__ import annotations

import contextlib
import fcntl
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable, Iterator, TypeVar

from .records import EventRecord, RunRecord

T = TypeVar("T")


class StoreError(Exception):
    pass


class DuplicateRunError(StoreError):
    pass


class CorruptStoreError(StoreError):
    def __init__(self, path: Path, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: corrupt line ({reason})")


@dataclass
class Query:
    spec_name: str | None = None
    machine_label: str | None = None
    params: dict[str, str] = field(default_factory=dict)
    time_from: datetime | None = None  # inclusive, on started_at
    time_to: datetime | None = None  # exclusive
    states: frozenset[str] | None = None

    def __post_init__(self):
        if self.time_from is not None and self.time_to is not None and self.time_from > self.time_to:
            raise ValueError("query time range is not well ordered")

    def matches(self, rec: RunRecord) -> bool:
        if self.spec_name is not None and rec.spec_name != self.spec_name:
            return False
        if self.machine_label is not None and rec.machine_label != self.machine_label:
            return False
        if any(rec.params.get(k) != v for k, v in self.params.items()):
            return False
        if self.time_from is not None and rec.started_at < self.time_from:
            return False
        if self.time_to is not None and rec.started_at >= self.time_to:
            return False
        if self.states is not None and rec.state not in self.states:
            return False
        return True


class Store:
    RECORDS = "records.jsonl"
    EVENTS = "events.jsonl"
    LOCK = "lock"

    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        if create:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
                (self.root / self.LOCK).touch(exist_ok=True)
            except OSError as exc:
                raise StoreError(f"store root {self.root} is not writable: {exc}") from exc
        self._thread_lock = threading.Lock()
        self._known_ids: set[str] = set()
        self._scanned = 0  # byte offset of records.jsonl already folded into _known_ids
        self._scanned_lines = 0

    @property
    def records_path(self) -> Path:
        return self.root / self.RECORDS

    @property
    def events_path(self) -> Path:
        return self.root / self.EVENTS

    def check_writable(self) -> None:
        """Raise StoreError unless a writer could append here."""
        if not os.access(self.root, os.W_OK):
            raise StoreError(f"store root {self.root} is not writable")
        with self._locked():
            pass

    @contextlib.contextmanager
    def _locked(self) -> Iterator[None]:
        with self._thread_lock:
            try:
                fd = os.open(self.root / self.LOCK, os.O_RDWR | os.O_CREAT, 0o644)
            except OSError as exc:
                raise StoreError(f"cannot open lock file in {self.root}: {exc}") from exc
            try:
                fcntl.flock(fd, fcntl.LOCK_EX)
                yield
            finally:
                fcntl.flock(fd, fcntl.LOCK_UN)
                os.close(fd)

    @staticmethod
    def _append_line(path: Path, line: str) -> None:
        data = (line + "\n").encode("utf-8")
        fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        try:
            # one write call keeps a line whole
            written = os.write(fd, data)
            if written != len(data):
                raise StoreError(f"short write to {path}")
            os.fsync(fd)
        finally:
            os.close(fd)

    @staticmethod
    def _read(path: Path, parse: Callable[[dict], T]) -> list[T]:
        if not path.exists():
            return []
        out = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.endswith("\n"):
                    # a writer is mid-append; readers see the complete prefix
                    break
                try:
                    out.append(parse(json.loads(line)))
                except (ValueError, TypeError, KeyError, AttributeError) as exc:
                    raise CorruptStoreError(path, lineno, str(exc)) from None
        return out

    # ------------------------------------------------------------------ records

    def append(self, record: RunRecord) -> None:
        record.validate()
        with self._locked():
            self._refresh_ids()
            if record.run_id in self._known_ids:
                raise DuplicateRunError(f"run_id {record.run_id} already stored")
            self._append_line(self.records_path, record.dumps())

    def _refresh_ids(self) -> None:
        if not self.records_path.exists():
            self._known_ids.clear()
            self._scanned = self._scanned_lines = 0
            return
        with open(self.records_path, "rb") as fh:
            fh.seek(self._scanned)
            for raw in fh:
                if not raw.endswith(b"\n"):
                    break
                try:
                    self._known_ids.add(json.loads(raw)["run_id"])
                except (ValueError, TypeError, KeyError) as exc:
                    raise CorruptStoreError(self.records_path, self._scanned_lines + 1, str(exc)) from None
                self._scanned += len(raw)
                self._scanned_lines += 1

    def all_records(self) -> list[RunRecord]:
        return self._read(self.records_path, RunRecord.from_json)

    def query(self, q: Query | None = None) -> list[RunRecord]:
        q = q or Query()
        recs = [r for r in self.all_records() if q.matches(r)]
        recs.sort(key=lambda r: (r.started_at, r.run_id))
        return recs

    # ------------------------------------------------------------------ events

    def append_event(self, event: EventRecord) -> None:
        line = json.dumps(event.to_json(), separators=(",", ":"))
        with self._locked():
            self._append_line(self.events_path, line)

    def list_events(
        self,
        start: datetime | None = None,
        end: datetime | None = None,
        machine_label: str | None = None,
    ) -> list[EventRecord]:
        """Events with ``start <= timestamp < end``, ordered by time."""
        if start is not None and end is not None and start > end:
            raise ValueError("event time range is not well ordered")
        events = [
            e
            for e in self._read(self.events_path, EventRecord.from_json)
            if (start is None or e.timestamp >= start)
            and (end is None or e.timestamp < end)
            and (machine_label is None or e.machine_label == machine_label)
        ]
        events.sort(key=lambda e: (e.timestamp, e.label))
        return events


def append_all(store: Store, records: Iterable[RunRecord]) -> None:
    for rec in records:
        store.append(rec)
