"""Journal append/replay discipline, crash safety, snapshot compaction."""

from __future__ import annotations

import hashlib
import json

import pytest

from btrs.auth import hash_password
from btrs.domain import Role
from btrs.errors import JournalError, SnapshotMismatch, ValidationFailed
from btrs.events import Event, decode_event, encode_event, parse_journal
from btrs.service import BugTracker
from btrs.store import (
    Store,
    apply_event,
    bootstrap_state,
    compact,
    encode_credential,
    replay,
    serialize_state,
    snapshot_state,
)
from tests.conftest import (
    ADMIN_PASSWORD,
    FakeClock,
    install_default_master_data,
    make_draft,
)


def cred_payload(password="password-123"):
    return encode_credential(hash_password(password, iterations=500))


def user_payload(user_id, username, role="DEVELOPER"):
    return {
        "user_id": user_id,
        "username": username,
        "role": role,
        "active": True,
        "credential": cred_payload(),
    }


class TestEventCodec:
    def test_line_field_order_is_fixed(self):
        event = Event(seq=1, ts="2026-01-01T00:00:00+00:00", actor_id=0,
                      kind="UserCreated", payload={"b": 1, "a": 2})
        line = encode_event(event)
        assert line.startswith('{"seq":1,"ts":"2026-01-01T00:00:00+00:00","actor_id":0,')
        assert '"payload":{"a":2,"b":1}' in line

    def test_round_trip(self):
        event = Event(seq=3, ts="2026-01-01T00:00:00+00:00", actor_id=2,
                      kind="BugTransitioned",
                      payload={"bug_id": 1, "from_status_id": 1, "to_status_id": 2,
                               "comment": "ok"})
        assert decode_event(encode_event(event), 1) == Event(
            seq=3, ts=event.ts, actor_id=2, kind=event.kind,
            payload={"bug_id": 1, "comment": "ok", "from_status_id": 1,
                     "to_status_id": 2})

    def test_corrupt_line_reports_line_number(self):
        good = encode_event(Event(1, "2026-01-01T00:00:00+00:00", 0, "UserCreated", {}))
        data = (good + "\n" + "{oops\n").encode()
        with pytest.raises(JournalError, match="line 2"):
            list(parse_journal(data))

    def test_unknown_kind_rejected(self):
        line = json.dumps({"seq": 1, "ts": "t", "actor_id": 0,
                           "kind": "TablesDropped", "payload": {}})
        with pytest.raises(JournalError, match="unknown event kind"):
            list(parse_journal((line + "\n").encode()))

    def test_seq_gap_names_the_offending_seq(self):
        lines = [
            encode_event(Event(1, "2026-01-01T00:00:00+00:00", 0, "UserCreated",
                               user_payload(2, "dev1"))),
            encode_event(Event(3, "2026-01-01T00:00:01+00:00", 0, "UserCreated",
                               user_payload(3, "dev2"))),
        ]
        with pytest.raises(JournalError, match="expected 2, found 3"):
            list(parse_journal("\n".join(lines).encode() + b"\n"))


class TestReplay:
    def test_empty_journal_is_bootstrap_state(self):
        state = replay(b"")
        assert set(state.users) == {1}
        assert state.users[1].username == "admin"
        assert state.users[1].role == Role.ADMIN
        assert state.users[1].credential is None
        assert not state.severities and not state.bugs
        assert state.last_seq == 0

    def test_two_event_fold_by_hand(self):
        events = [
            Event(1, "2026-01-01T00:00:00+00:00", 1, "UserCreated",
                  user_payload(2, "dev1")),
            Event(2, "2026-01-01T00:00:01+00:00", 1, "SeverityUpserted",
                  {"level": {"sev_id": 1, "name": "Blocker", "rank": 1,
                             "description": ""}}),
        ]
        data = "".join(encode_event(e) + "\n" for e in events).encode()
        state = replay(data)
        assert len(state.users) == 2  # bootstrap admin + dev1
        assert state.users[2].username == "dev1"
        assert len(state.severities) == 1
        assert state.severities[1].name == "Blocker"

    def test_rejected_append_leaves_journal_bytes_identical(self, store):
        store.append("UserCreated", user_payload(2, "dev1"), actor_id=0)
        before = hashlib.sha256(store.journal_path.read_bytes()).hexdigest()
        with pytest.raises(ValidationFailed):
            store.append("UserCreated", user_payload(9, "dev2"), actor_id=0)  # id gap
        after = hashlib.sha256(store.journal_path.read_bytes()).hexdigest()
        assert before == after

    def test_append_assigns_gapless_seq(self, store):
        e1 = store.append("UserCreated", user_payload(2, "dev1"), actor_id=0)
        e2 = store.append("UserCreated", user_payload(3, "dev2"), actor_id=0)
        assert (e1.seq, e2.seq) == (1, 2)

    def test_fold_rejects_duplicate_username(self):
        state = bootstrap_state()
        state = apply_event(state, Event(1, "2026-01-01T00:00:00+00:00", 0,
                                         "UserCreated", user_payload(2, "dev1")))
        with pytest.raises(ValidationFailed):
            apply_event(state, Event(2, "2026-01-01T00:00:01+00:00", 0,
                                     "UserCreated", user_payload(3, "dev1")))

    def test_fold_rejects_timestamp_regression(self):
        state = bootstrap_state()
        state = apply_event(state, Event(1, "2026-01-01T00:00:10+00:00", 0,
                                         "UserCreated", user_payload(2, "dev1")))
        with pytest.raises(ValidationFailed, match="regresses"):
            apply_event(state, Event(2, "2026-01-01T00:00:05+00:00", 0,
                                     "UserCreated", user_payload(3, "dev2")))


def build_sample_journal(tmp_path, n_bugs=3):
    """Drive the real service to lay down a realistic journal; returns its path."""
    clock = FakeClock()
    store = Store(tmp_path / "data", clock=clock)
    tracker = BugTracker(store)
    tracker.init_admin_password(ADMIN_PASSWORD)
    admin = tracker.state.users[1]
    install_default_master_data(tracker, admin)
    manager = tracker.register_user(admin, "manager1", "manager-pw-1", Role.MANAGER)
    dev = tracker.register_user(admin, "dev1", "developer-pw-1", Role.DEVELOPER)
    project = tracker.create_project(manager, "Billing", "", manager.user_id)
    tracker.assign_project(manager, dev.user_id, project.project_id, "ACTIVE")
    for i in range(n_bugs):
        bug = tracker.report_bug(dev, make_draft(project, severity_id=1 + i % 5,
                                                 bug_name=f"bug {i}"))
        tracker.assign_bug(manager, bug.bug_id, dev.user_id)
    store.close()
    return store.journal_path


class TestDeterminismAndCrashSafety:
    def test_two_replays_serialize_identically(self, tmp_path):
        path = build_sample_journal(tmp_path)
        data = path.read_bytes()
        assert serialize_state(replay(data)) == serialize_state(replay(data))

    def test_truncation_at_every_line_boundary_replays(self, tmp_path):
        path = build_sample_journal(tmp_path)
        lines = path.read_bytes().splitlines(keepends=True)
        for cut in range(len(lines) + 1):
            prefix = b"".join(lines[:cut])
            state = replay(prefix)
            assert state.last_seq == cut

    def test_partial_trailing_line_is_corrupt(self, tmp_path):
        path = build_sample_journal(tmp_path)
        data = path.read_bytes()
        with pytest.raises(JournalError):
            replay(data[:-10])

    def test_reopening_store_resumes_seq(self, tmp_path):
        path = build_sample_journal(tmp_path)
        store = Store(path.parent)
        before = store.state.last_seq
        store.append("UserCreated", user_payload(before_id := store.state.next_id(
            store.state.users), "late-user"), actor_id=0)
        assert store.state.last_seq == before + 1
        assert store.state.users[before_id].username == "late-user"
        store.close()


class TestSnapshotCompact:
    def test_snapshot_header_carries_seq(self, tmp_path):
        path = build_sample_journal(tmp_path)
        state = replay(path.read_bytes())
        snap = snapshot_state(state)
        assert snap.decode().splitlines()[0] == f"BTRS-SNAPSHOT v1 seq={state.last_seq}"

    def test_compact_with_empty_tail_equals_replay(self, tmp_path):
        path = build_sample_journal(tmp_path)
        full = replay(path.read_bytes())
        snap = snapshot_state(full)
        assert serialize_state(compact(snap, b"")) == serialize_state(full)

    def test_every_split_point_reconstructs_full_state(self, tmp_path):
        path = build_sample_journal(tmp_path)
        lines = path.read_bytes().splitlines(keepends=True)
        full = serialize_state(replay(path.read_bytes()))
        for cut in range(len(lines) + 1):
            prefix, tail = b"".join(lines[:cut]), b"".join(lines[cut:])
            snap = snapshot_state(replay(prefix))
            assert serialize_state(compact(snap, tail)) == full, f"split at {cut}"

    def test_tail_starting_at_wrong_seq_rejected(self, tmp_path):
        path = build_sample_journal(tmp_path)
        lines = path.read_bytes().splitlines(keepends=True)
        snap = snapshot_state(replay(b"".join(lines[:3])))
        bad_tail = b"".join(lines[5:])
        with pytest.raises(SnapshotMismatch):
            compact(snap, bad_tail)

    def test_store_writes_snapshot_file(self, tmp_path):
        path = build_sample_journal(tmp_path)
        store = Store(path.parent)
        out = store.save_snapshot()
        assert out.name == "snapshot.bin"
        restored = compact(out.read_bytes(), b"")
        assert serialize_state(restored) == serialize_state(store.state)
        store.close()
