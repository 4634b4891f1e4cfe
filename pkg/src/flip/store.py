"""Filesystem-backed registry of simulation runs.

Layout under the store root:

    index.json              id -> {created_at, status}
    <run_id>/config.json    the launch configuration, written once
    <run_id>/events.jsonl   append-only event log, one JSON object per line
    <run_id>/snapshot.json  latest aggregate state, rewritten atomically

The index is the single authority on run status. Transitions follow
pending -> running -> {paused <-> running} -> {done | aborted} and
nothing else; anything outside that graph raises InvalidTransition so
callers can surface a conflict instead of corrupting state.
"""
from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path

PENDING = "pending"
RUNNING = "running"
PAUSED = "paused"
DONE = "done"
ABORTED = "aborted"

TERMINAL = (DONE, ABORTED)

_ALLOWED = {
    PENDING: {RUNNING, ABORTED},
    RUNNING: {PAUSED, DONE, ABORTED},
    PAUSED: {RUNNING, ABORTED},
    DONE: set(),
    ABORTED: set(),
}


class StoreError(Exception):
    """Base failure for registry operations."""


class UnknownRun(StoreError, KeyError):
    """The id does not name a run in this store."""


class InvalidTransition(StoreError):
    """The requested status change is not on the allowed graph."""


def _atomic_write(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True),
                   encoding="utf-8")
    os.replace(tmp, path)


class RunRegistry:
    """Thread-safe persistence for run metadata, events, and snapshots."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._index_path = self.root / "index.json"
        if not self._index_path.exists():
            _atomic_write(self._index_path, {"runs": {}})

    # -- index ------------------------------------------------------------

    def _read_index(self) -> dict:
        with open(self._index_path, encoding="utf-8") as fh:
            return json.load(fh)

    def _write_index(self, index: dict) -> None:
        _atomic_write(self._index_path, index)

    def _entry(self, index: dict, run_id: str) -> dict:
        try:
            return index["runs"][run_id]
        except KeyError:
            raise UnknownRun(run_id) from None

    # -- lifecycle ----------------------------------------------------------

    def create(self, config: dict) -> str:
        with self._lock:
            index = self._read_index()
            run_id = uuid.uuid4().hex[:12]
            while run_id in index["runs"]:
                run_id = uuid.uuid4().hex[:12]
            run_dir = self.root / run_id
            run_dir.mkdir()
            _atomic_write(run_dir / "config.json", config)
            (run_dir / "events.jsonl").touch()
            index["runs"][run_id] = {
                "created_at": time.time(),
                "status": PENDING,
            }
            self._write_index(index)
            return run_id

    def list_runs(self) -> list[dict]:
        with self._lock:
            index = self._read_index()
        rows = [
            {"run_id": rid, **meta} for rid, meta in index["runs"].items()
        ]
        rows.sort(key=lambda row: row["created_at"])
        return rows

    def status(self, run_id: str) -> str:
        with self._lock:
            return self._entry(self._read_index(), run_id)["status"]

    def set_status(self, run_id: str, new_status: str) -> None:
        if new_status not in _ALLOWED:
            raise InvalidTransition(f"unknown status {new_status!r}")
        with self._lock:
            index = self._read_index()
            entry = self._entry(index, run_id)
            current = entry["status"]
            if new_status not in _ALLOWED[current]:
                raise InvalidTransition(
                    f"run {run_id} cannot go from {current} to {new_status}"
                )
            entry["status"] = new_status
            self._write_index(index)

    def config(self, run_id: str) -> dict:
        with self._lock:
            self._entry(self._read_index(), run_id)
            with open(self.root / run_id / "config.json",
                      encoding="utf-8") as fh:
                return json.load(fh)

    # -- events and snapshots -------------------------------------------------

    def append_event(self, run_id: str, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with self._lock:
            self._entry(self._read_index(), run_id)
            with open(self.root / run_id / "events.jsonl", "a",
                      encoding="utf-8") as fh:
                fh.write(line + "\n")

    def events(self, run_id: str, start: int = 0) -> list[dict]:
        """Events from index `start` on, in append order."""
        with self._lock:
            self._entry(self._read_index(), run_id)
            with open(self.root / run_id / "events.jsonl",
                      encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        return [json.loads(line) for line in lines[start:] if line]

    def write_snapshot(self, run_id: str, snapshot: dict) -> None:
        with self._lock:
            self._entry(self._read_index(), run_id)
            _atomic_write(self.root / run_id / "snapshot.json", snapshot)

    def read_snapshot(self, run_id: str) -> dict | None:
        with self._lock:
            self._entry(self._read_index(), run_id)
            path = self.root / run_id / "snapshot.json"
            if not path.exists():
                return None
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)

    # -- recovery -------------------------------------------------------------

    def recover(self) -> list[str]:
        """Abort runs a dead process left unfinished. Returns their ids."""
        recovered = []
        with self._lock:
            index = self._read_index()
            for run_id, entry in index["runs"].items():
                if entry["status"] in TERMINAL:
                    continue
                entry["status"] = ABORTED
                recovered.append(run_id)
            if recovered:
                self._write_index(index)
        for run_id in recovered:
            self.append_event(run_id, {
                "type": "done",
                "status": ABORTED,
                "diagnostic": "interrupted by a restart",
            })
        return recovered
