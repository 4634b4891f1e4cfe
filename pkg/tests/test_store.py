"""Tests for the filesystem run registry."""
import json
import threading

import pytest

from flip.store import (
    ABORTED,
    DONE,
    PAUSED,
    PENDING,
    RUNNING,
    InvalidTransition,
    RunRegistry,
    UnknownRun,
)


@pytest.fixture()
def registry(tmp_path):
    return RunRegistry(tmp_path / "store")


def test_create_starts_pending_with_config(registry):
    run_id = registry.create({"rounds": 3})
    assert registry.status(run_id) == PENDING
    assert registry.config(run_id) == {"rounds": 3}


def test_ids_are_unique(registry):
    ids = {registry.create({}) for _ in range(50)}
    assert len(ids) == 50


def test_list_runs_in_creation_order(registry):
    first = registry.create({})
    second = registry.create({})
    rows = registry.list_runs()
    assert [row["run_id"] for row in rows] == [first, second]
    assert all(row["status"] == PENDING for row in rows)


def test_happy_path_transitions(registry):
    run_id = registry.create({})
    for status in (RUNNING, PAUSED, RUNNING, DONE):
        registry.set_status(run_id, status)
    assert registry.status(run_id) == DONE


def test_invalid_transitions_are_rejected(registry):
    run_id = registry.create({})
    with pytest.raises(InvalidTransition):
        registry.set_status(run_id, PAUSED)  # pending cannot pause
    registry.set_status(run_id, RUNNING)
    registry.set_status(run_id, PAUSED)
    with pytest.raises(InvalidTransition):
        registry.set_status(run_id, DONE)  # must resume before finishing
    registry.set_status(run_id, ABORTED)
    for status in (RUNNING, PAUSED, DONE):
        with pytest.raises(InvalidTransition):
            registry.set_status(run_id, status)


def test_unknown_status_is_rejected(registry):
    run_id = registry.create({})
    with pytest.raises(InvalidTransition):
        registry.set_status(run_id, "daydreaming")


def test_unknown_run_raises(registry):
    with pytest.raises(UnknownRun):
        registry.status("nope")
    with pytest.raises(UnknownRun):
        registry.append_event("nope", {})
    with pytest.raises(UnknownRun):
        registry.events("nope")


def test_events_append_in_order_with_offset(registry):
    run_id = registry.create({})
    for i in range(5):
        registry.append_event(run_id, {"type": "round_complete", "round": i})
    assert [e["round"] for e in registry.events(run_id)] == [0, 1, 2, 3, 4]
    assert [e["round"] for e in registry.events(run_id, start=3)] == [3, 4]
    assert registry.events(run_id, start=99) == []


def test_snapshot_round_trip(registry):
    run_id = registry.create({})
    assert registry.read_snapshot(run_id) is None
    registry.write_snapshot(run_id, {"rounds_done": 2})
    registry.write_snapshot(run_id, {"rounds_done": 3})
    assert registry.read_snapshot(run_id) == {"rounds_done": 3}


def test_restart_sees_everything(tmp_path):
    root = tmp_path / "store"
    first = RunRegistry(root)
    run_id = first.create({"rounds": 7})
    first.set_status(run_id, RUNNING)
    first.set_status(run_id, DONE)
    first.append_event(run_id, {"type": "done", "status": DONE})
    first.write_snapshot(run_id, {"final": True})

    second = RunRegistry(root)
    assert second.status(run_id) == DONE
    assert second.config(run_id) == {"rounds": 7}
    assert second.events(run_id) == [{"type": "done", "status": DONE}]
    assert second.read_snapshot(run_id) == {"final": True}


def test_recover_aborts_unfinished_runs(tmp_path):
    root = tmp_path / "store"
    first = RunRegistry(root)
    finished = first.create({})
    first.set_status(finished, RUNNING)
    first.set_status(finished, DONE)
    stuck = first.create({})
    first.set_status(stuck, RUNNING)
    queued = first.create({})

    second = RunRegistry(root)
    recovered = second.recover()
    assert set(recovered) == {stuck, queued}
    assert second.status(finished) == DONE
    assert second.status(stuck) == ABORTED
    assert second.status(queued) == ABORTED
    last = second.events(stuck)[-1]
    assert last["type"] == "done" and last["status"] == ABORTED


def test_concurrent_appends_stay_line_delimited(registry):
    run_id = registry.create({})

    def writer(tag):
        for i in range(50):
            registry.append_event(run_id, {"tag": tag, "i": i})

    threads = [threading.Thread(target=writer, args=(t,)) for t in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    events = registry.events(run_id)
    assert len(events) == 200
    per_tag = [[e["i"] for e in events if e["tag"] == tag] for tag in range(4)]
    for seen in per_tag:
        assert seen == list(range(50))


def test_store_files_are_valid_json(registry, tmp_path):
    run_id = registry.create({"note": "layout"})
    registry.append_event(run_id, {"type": "warning"})
    registry.write_snapshot(run_id, {"ok": True})
    run_dir = registry.root / run_id
    for name in ("config.json", "snapshot.json"):
        json.loads((run_dir / name).read_text())
    index = json.loads((registry.root / "index.json").read_text())
    assert run_id in index["runs"]
