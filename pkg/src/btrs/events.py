"""Journal event records and their one-line JSON wire form.

One event per line, UTF-8, newline-terminated. Field names are fixed:
"seq", "ts", "actor_id", "kind", "payload" — in that order, with payload
keys sorted — so identical histories produce identical bytes and golden
files stay stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterator

from .errors import JournalError

EVENT_KINDS = (
    "UserCreated",
    "SeverityUpserted",
    "StatusUpserted",
    "GraphUpdated",
    "BugTypeCreated",
    "ProjectCreated",
    "ModuleAdded",
    "ProjectAssigned",
    "ProjectStatusSet",
    "BugReported",
    "BugAssigned",
    "BugTransitioned",
)

_FIELDS = ("seq", "ts", "actor_id", "kind", "payload")


@dataclass(frozen=True)
class Event:
    seq: int
    ts: str  # RFC 3339 UTC
    actor_id: int  # 0 for bootstrap actions
    kind: str
    payload: dict


def _canon(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _canon(value[key]) for key in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_canon(item) for item in value]
    return value


def encode_event(event: Event) -> str:
    record = {
        "seq": event.seq,
        "ts": event.ts,
        "actor_id": event.actor_id,
        "kind": event.kind,
        "payload": _canon(event.payload),
    }
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def decode_event(line: str, lineno: int) -> Event:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise JournalError(f"line {lineno}: corrupt event line ({exc.msg})")
    if not isinstance(record, dict) or set(record) != set(_FIELDS):
        raise JournalError(f"line {lineno}: corrupt event line (bad field set)")
    if not isinstance(record["seq"], int) or not isinstance(record["actor_id"], int):
        raise JournalError(f"line {lineno}: corrupt event line (non-integer seq/actor_id)")
    if not isinstance(record["ts"], str) or not isinstance(record["kind"], str):
        raise JournalError(f"line {lineno}: corrupt event line (bad ts/kind)")
    if record["kind"] not in EVENT_KINDS:
        raise JournalError(f"line {lineno}: unknown event kind {record['kind']!r}")
    if not isinstance(record["payload"], dict):
        raise JournalError(f"line {lineno}: corrupt event line (payload not an object)")
    return Event(
        seq=record["seq"],
        ts=record["ts"],
        actor_id=record["actor_id"],
        kind=record["kind"],
        payload=record["payload"],
    )


def parse_journal(data: bytes, first_seq: int = 1) -> Iterator[Event]:
    """Decode journal bytes into events, enforcing the gapless seq chain.

    ``first_seq`` is the seq the first line must carry (1 for a full
    journal, snapshot seq + 1 for a tail).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise JournalError(f"journal is not valid UTF-8 at byte {exc.start}")
    expected = first_seq
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            raise JournalError(f"line {lineno}: blank journal line")
        event = decode_event(line, lineno)
        if event.seq != expected:
            raise JournalError(
                f"line {lineno}: gap in seq (expected {expected}, found {event.seq})"
            )
        expected += 1
        yield event
