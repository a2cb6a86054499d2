"""Event-sourced store: fold, replay, snapshot compaction, journal writer.

The whole system state is a pure fold over the journal's event sequence.
Every applier below both validates its payload against the current state
and produces the next state, so replaying a journal re-checks every
domain invariant after every prefix. The Store wraps the fold with a
write-ahead journal file: an event is flushed to disk before the command
that produced it reports success.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from .domain import (
    PROJECT_STATUS_VALUES,
    Assignment,
    Bug,
    BugDraft,
    BugType,
    Credential,
    Project,
    ProjectModule,
    Role,
    SeverityLevel,
    StatusLevel,
    TransitionEvent,
    User,
    validate_bug_record,
    validate_status_graph,
)
from .errors import IoFailure, JournalError, SnapshotMismatch, ValidationFailed
from .events import Event, decode_event, encode_event, parse_journal

BOOTSTRAP_ADMIN_ID = 1
BOOTSTRAP_ADMIN_USERNAME = "admin"
SNAPSHOT_MAGIC = "BTRS-SNAPSHOT v1"

JOURNAL_FILENAME = "journal.log"
SNAPSHOT_FILENAME = "snapshot.bin"


@dataclass(frozen=True)
class StoreState:
    """Immutable in-memory state; appliers return fresh instances."""

    users: dict[int, User]
    severities: dict[int, SeverityLevel]
    statuses: dict[int, StatusLevel]
    graph_edges: frozenset[tuple[int, int]]
    bug_types: dict[int, BugType]
    projects: dict[int, Project]
    modules: dict[int, ProjectModule]
    assignments: dict[tuple[int, int], Assignment]
    bugs: dict[int, Bug]
    last_seq: int = 0
    last_ts: str = ""

    def initial_status(self) -> Optional[StatusLevel]:
        for level in self.statuses.values():
            if level.initial:
                return level
        return None

    def user_by_name(self, username: str) -> Optional[User]:
        for user in self.users.values():
            if user.username == username:
                return user
        return None

    def next_id(self, table: dict[int, object]) -> int:
        return max(table, default=0) + 1


def bootstrap_state() -> StoreState:
    """Fold base: the built-in admin (password unset until first start) and
    empty master tables."""
    admin = User(
        user_id=BOOTSTRAP_ADMIN_ID,
        username=BOOTSTRAP_ADMIN_USERNAME,
        role=Role.ADMIN,
        active=True,
        credential=None,
    )
    return StoreState(
        users={admin.user_id: admin},
        severities={},
        statuses={},
        graph_edges=frozenset(),
        bug_types={},
        projects={},
        modules={},
        assignments={},
        bugs={},
    )


def _fail(field: str, rule: str) -> None:
    raise ValidationFailed(f"{field}: {rule}", details=[{"field": field, "rule": rule}])


def _req(payload: dict, field: str, types, *, where: str = "payload"):
    if field not in payload:
        _fail(field, f"missing from {where}")
    value = payload[field]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        _fail(field, "must not be a boolean")
    if not isinstance(value, types):
        _fail(field, f"has wrong type {type(value).__name__}")
    return value


def _req_pos_int(payload: dict, field: str) -> int:
    value = _req(payload, field, int)
    if value < 1:
        _fail(field, "must be a positive integer")
    return value


def _req_text(payload: dict, field: str) -> str:
    value = _req(payload, field, str)
    if not value.strip():
        _fail(field, "must be non-empty")
    return value


def _opt_int(payload: dict, field: str) -> Optional[int]:
    value = payload.get(field)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        _fail(field, "must be null or a positive integer")
    return value


def _req_status_text(payload: dict, field: str = "status_text") -> str:
    value = _req(payload, field, str)
    if value not in PROJECT_STATUS_VALUES:
        _fail(field, f"must be one of {', '.join(PROJECT_STATUS_VALUES)}")
    return value


def _decode_credential(raw, field: str = "credential") -> Optional[Credential]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        _fail(field, "must be null or an object")
    try:
        salt = bytes.fromhex(_req_text(raw, "salt"))
        verifier = bytes.fromhex(_req_text(raw, "verifier"))
    except ValueError:
        _fail(field, "salt/verifier must be hex")
    iterations = _req_pos_int(raw, "iterations")
    return Credential(salt=salt, verifier=verifier, iterations=iterations)


def encode_credential(credential: Optional[Credential]) -> Optional[dict]:
    if credential is None:
        return None
    return {
        "salt": credential.salt.hex(),
        "verifier": credential.verifier.hex(),
        "iterations": credential.iterations,
    }


def parse_ts(value: str) -> datetime:
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def rfc3339(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat(timespec="microseconds")


def _check_history_monotone(bug: Bug, ts: str) -> None:
    if bug.history and parse_ts(ts) < parse_ts(bug.history[-1].at):
        _fail("ts", f"timestamp regresses within bug {bug.bug_id} history")


def _apply_user_created(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    user_id = _req_pos_int(p, "user_id")
    username = _req_text(p, "username")
    role_text = _req_text(p, "role")
    try:
        role = Role(role_text)
    except ValueError:
        _fail("role", f"unknown role {role_text!r}")
    active = _req(p, "active", bool)
    credential = _decode_credential(p.get("credential"))

    existing = state.users.get(user_id)
    if existing is not None:
        # Only the bootstrap password-initialization path replaces a user,
        # and it must not rewrite the identity.
        if existing.username != username or existing.role != role:
            _fail("user_id", f"user {user_id} already exists with a different identity")
    else:
        other = state.user_by_name(username)
        if other is not None:
            _fail("username", f"username {username!r} already taken")
        if user_id != state.next_id(state.users):
            _fail("user_id", f"expected next user id {state.next_id(state.users)}")

    user = User(user_id=user_id, username=username, role=role, active=active,
                credential=credential)
    return replace(state, users={**state.users, user_id: user})


def _apply_severity_upserted(state: StoreState, event: Event) -> StoreState:
    p = _req(event.payload, "level", dict)
    sev_id = _req_pos_int(p, "sev_id")
    name = _req_text(p, "name")
    rank = _req_pos_int(p, "rank")
    description = _req(p, "description", str) if "description" in p else ""

    for other in state.severities.values():
        if other.sev_id == sev_id:
            continue
        if other.rank == rank:
            _fail("rank", f"rank {rank} already used by {other.name}")
        if other.name == name:
            _fail("name", f"name {name!r} already used by severity {other.sev_id}")

    level = SeverityLevel(sev_id=sev_id, name=name, rank=rank, description=description)
    return replace(state, severities={**state.severities, sev_id: level})


def _decode_status_level(raw: dict) -> StatusLevel:
    return StatusLevel(
        status_id=_req_pos_int(raw, "status_id"),
        name=_req_text(raw, "name"),
        rank=_req_pos_int(raw, "rank"),
        initial=_req(raw, "initial", bool),
        terminal=_req(raw, "terminal", bool),
    )


def _decode_edges(payload: dict) -> frozenset[tuple[int, int]]:
    graph = _req(payload, "graph", dict)
    raw_edges = _req(graph, "edges", list, where="graph")
    edges = set()
    for pair in raw_edges:
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)):
            _fail("edges", "each edge must be a [from_status_id, to_status_id] pair")
        edges.add((pair[0], pair[1]))
    return frozenset(edges)


def _apply_status_upserted(state: StoreState, event: Event) -> StoreState:
    raw_levels = _req(event.payload, "levels", list)
    if not raw_levels:
        _fail("levels", "must name at least one status level")
    levels = [_decode_status_level(raw) for raw in raw_levels if isinstance(raw, dict)]
    if len(levels) != len(raw_levels):
        _fail("levels", "each level must be an object")
    edges = _decode_edges(event.payload)

    candidate = dict(state.statuses)
    for level in levels:
        candidate[level.status_id] = level
    result = validate_status_graph(candidate.values(), edges)
    if not result.ok:
        raise ValidationFailed(
            "status graph invalid: " + "; ".join(result.messages()),
            details=[e.as_dict() for e in result.errors],
        )
    return replace(state, statuses=candidate, graph_edges=edges)


def _apply_graph_updated(state: StoreState, event: Event) -> StoreState:
    edges = _decode_edges(event.payload)
    result = validate_status_graph(state.statuses.values(), edges)
    if not result.ok:
        raise ValidationFailed(
            "status graph invalid: " + "; ".join(result.messages()),
            details=[e.as_dict() for e in result.errors],
        )
    return replace(state, graph_edges=edges)


def _apply_bug_type_created(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    type_id = _req_pos_int(p, "type_id")
    type_name = _req_text(p, "type_name")
    type_desc = _req_text(p, "type_desc")
    expected = state.next_id(state.bug_types)
    if type_id != expected:
        _fail("type_id", f"expected next type id {expected}")
    record = BugType(type_id=type_id, type_name=type_name, type_desc=type_desc)
    return replace(state, bug_types={**state.bug_types, type_id: record})


def _apply_project_created(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    project_id = _req_pos_int(p, "project_id")
    name = _req_text(p, "project_name")
    description = _req(p, "description", str)
    status_text = _req_status_text(p)
    manager_id = _req_pos_int(p, "manager_id")

    expected = state.next_id(state.projects)
    if project_id != expected:
        _fail("project_id", f"expected next project id {expected}")
    if any(proj.project_name == name for proj in state.projects.values()):
        _fail("project_name", f"project name {name!r} already taken")
    manager = state.users.get(manager_id)
    if manager is None:
        _fail("manager_id", f"unknown user {manager_id}")
    if manager.role not in (Role.MANAGER, Role.ADMIN):
        _fail("manager_id", f"user {manager.username} is not a MANAGER or ADMIN")

    project = Project(project_id=project_id, project_name=name, description=description,
                      status_text=status_text, manager_id=manager_id)
    return replace(state, projects={**state.projects, project_id: project})


def _apply_module_added(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    module_id = _req_pos_int(p, "module_id")
    project_id = _req_pos_int(p, "project_id")
    name = _req_text(p, "name")
    assignee_id = _opt_int(p, "assignee_id")

    expected = state.next_id(state.modules)
    if module_id != expected:
        _fail("module_id", f"expected next module id {expected}")
    if project_id not in state.projects:
        _fail("project_id", f"unknown project {project_id}")
    for other in state.modules.values():
        if other.project_id == project_id and other.name == name:
            _fail("name", f"module name {name!r} already used in project {project_id}")
    if assignee_id is not None:
        assignee = state.users.get(assignee_id)
        if assignee is None:
            _fail("assignee_id", f"unknown user {assignee_id}")
        if assignee.role != Role.DEVELOPER or not assignee.active:
            _fail("assignee_id", f"user {assignee.username} is not an active DEVELOPER")

    module = ProjectModule(module_id=module_id, project_id=project_id, name=name,
                           assignee_id=assignee_id)
    return replace(state, modules={**state.modules, module_id: module})


def _apply_project_assigned(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    user_id = _req_pos_int(p, "user_id")
    project_id = _req_pos_int(p, "project_id")
    status_text = _req_status_text(p)
    if user_id not in state.users:
        _fail("user_id", f"unknown user {user_id}")
    if project_id not in state.projects:
        _fail("project_id", f"unknown project {project_id}")
    assignment = Assignment(user_id=user_id, project_id=project_id, status_text=status_text)
    key = (user_id, project_id)
    return replace(state, assignments={**state.assignments, key: assignment})


def _apply_project_status_set(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    project_id = _req_pos_int(p, "project_id")
    status_text = _req_status_text(p)
    project = state.projects.get(project_id)
    if project is None:
        _fail("project_id", f"unknown project {project_id}")
    updated = replace(project, status_text=status_text)
    return replace(state, projects={**state.projects, project_id: updated})


def _apply_bug_reported(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    bug_id = _req_pos_int(p, "bug_id")
    expected = state.next_id(state.bugs)
    if bug_id != expected:
        _fail("bug_id", f"expected next bug id {expected}")

    draft = BugDraft(
        bug_name=p.get("bug_name", ""),
        project_id=_opt_int(p, "project_id"),
        type_id=_opt_int(p, "type_id"),
        severity_id=_opt_int(p, "severity_id"),
        status_id=_opt_int(p, "status_id"),
        module_id=_opt_int(p, "module_id"),
        description=_req(p, "description", str) if "description" in p else "",
    )
    result = validate_bug_record(draft, state, require_status=True, bug_id=bug_id)
    if not result.ok:
        raise ValidationFailed(
            "bug record invalid: " + "; ".join(result.messages()),
            details=[e.as_dict() for e in result.errors],
        )

    initial = state.initial_status()
    if initial is None or draft.status_id != initial.status_id:
        _fail("status_id", "new bugs must start at the initial status")

    reporter_id = _req_pos_int(p, "reporter_id")
    if reporter_id not in state.users:
        _fail("reporter_id", f"unknown user {reporter_id}")
    assignee_id = _opt_int(p, "assignee_id")
    if assignee_id is not None:
        assignee = state.users.get(assignee_id)
        if assignee is None or assignee.role != Role.DEVELOPER or not assignee.active:
            _fail("assignee_id", "assignee must be an active DEVELOPER")

    creation = TransitionEvent(
        bug_id=bug_id,
        from_status_id=None,
        to_status_id=draft.status_id,
        actor_id=event.actor_id,
        at=event.ts,
        comment="",
    )
    bug = Bug(
        bug_id=bug_id,
        bug_name=draft.bug_name,
        project_id=draft.project_id,
        type_id=draft.type_id,
        severity_id=draft.severity_id,
        status_id=draft.status_id,
        reporter_id=reporter_id,
        created_at=event.ts,
        description=draft.description,
        module_id=draft.module_id,
        assignee_id=assignee_id,
        history=(creation,),
    )
    return replace(state, bugs={**state.bugs, bug_id: bug})


def _checked_transition(state: StoreState, bug: Bug, to_status_id: int,
                        event: Event, comment: str) -> Bug:
    if to_status_id not in state.statuses:
        _fail("to_status_id", f"unknown status level {to_status_id}")
    edge = (bug.status_id, to_status_id)
    if edge not in state.graph_edges:
        frm = state.statuses[bug.status_id].name
        to = state.statuses[to_status_id].name
        _fail("to_status_id", f"no edge {frm} -> {to} in the status graph")
    _check_history_monotone(bug, event.ts)
    entry = TransitionEvent(
        bug_id=bug.bug_id,
        from_status_id=bug.status_id,
        to_status_id=to_status_id,
        actor_id=event.actor_id,
        at=event.ts,
        comment=comment,
    )
    return replace(bug, status_id=to_status_id, history=bug.history + (entry,))


def _apply_bug_assigned(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    bug_id = _req_pos_int(p, "bug_id")
    assignee_id = _req_pos_int(p, "assignee_id")
    bug = state.bugs.get(bug_id)
    if bug is None:
        _fail("bug_id", f"unknown bug {bug_id}")
    assignee = state.users.get(assignee_id)
    if assignee is None or assignee.role != Role.DEVELOPER or not assignee.active:
        _fail("assignee_id", "assignee must be an active DEVELOPER")

    updated = replace(bug, assignee_id=assignee_id)
    transition = p.get("transition")
    if transition is not None:
        if not isinstance(transition, dict):
            _fail("transition", "must be null or an object")
        from_id = _req_pos_int(transition, "from_status_id")
        to_id = _req_pos_int(transition, "to_status_id")
        if from_id != bug.status_id:
            _fail("transition", f"from_status_id {from_id} is not the bug's current status")
        updated = _checked_transition(state, updated, to_id, event, "")
    return replace(state, bugs={**state.bugs, bug_id: updated})


def _apply_bug_transitioned(state: StoreState, event: Event) -> StoreState:
    p = event.payload
    bug_id = _req_pos_int(p, "bug_id")
    from_id = _req_pos_int(p, "from_status_id")
    to_id = _req_pos_int(p, "to_status_id")
    comment = _req(p, "comment", str) if "comment" in p else ""
    bug = state.bugs.get(bug_id)
    if bug is None:
        _fail("bug_id", f"unknown bug {bug_id}")
    if from_id != bug.status_id:
        _fail("from_status_id", f"bug {bug_id} is not in status {from_id}")
    updated = _checked_transition(state, bug, to_id, event, comment)
    return replace(state, bugs={**state.bugs, bug_id: updated})


_APPLIERS: dict[str, Callable[[StoreState, Event], StoreState]] = {
    "UserCreated": _apply_user_created,
    "SeverityUpserted": _apply_severity_upserted,
    "StatusUpserted": _apply_status_upserted,
    "GraphUpdated": _apply_graph_updated,
    "BugTypeCreated": _apply_bug_type_created,
    "ProjectCreated": _apply_project_created,
    "ModuleAdded": _apply_module_added,
    "ProjectAssigned": _apply_project_assigned,
    "ProjectStatusSet": _apply_project_status_set,
    "BugReported": _apply_bug_reported,
    "BugAssigned": _apply_bug_assigned,
    "BugTransitioned": _apply_bug_transitioned,
}


def apply_event(state: StoreState, event: Event) -> StoreState:
    """Validate and apply one event; raises ValidationFailed, never mutates."""
    applier = _APPLIERS.get(event.kind)
    if applier is None:
        raise ValidationFailed(f"unknown event kind {event.kind!r}")
    if event.seq != state.last_seq + 1:
        _fail("seq", f"expected {state.last_seq + 1}, found {event.seq}")
    if state.last_ts and parse_ts(event.ts) < parse_ts(state.last_ts):
        _fail("ts", "event timestamp regresses")
    next_state = applier(state, event)
    return replace(next_state, last_seq=event.seq, last_ts=event.ts)


def replay(data: bytes) -> StoreState:
    """Fold journal bytes into a state. Empty input yields the bootstrap state."""
    state = bootstrap_state()
    for event in parse_journal(data, first_seq=1):
        try:
            state = apply_event(state, event)
        except ValidationFailed as exc:
            raise JournalError(f"line {event.seq}: event rejected during replay: {exc.message}")
    return state


# -- state serialization ----------------------------------------------------

def state_to_dict(state: StoreState) -> dict:
    return {
        "last_seq": state.last_seq,
        "last_ts": state.last_ts,
        "users": [
            {
                "user_id": u.user_id,
                "username": u.username,
                "role": u.role.value,
                "active": u.active,
                "credential": encode_credential(u.credential),
            }
            for u in sorted(state.users.values(), key=lambda u: u.user_id)
        ],
        "severities": [
            {"sev_id": s.sev_id, "name": s.name, "rank": s.rank, "description": s.description}
            for s in sorted(state.severities.values(), key=lambda s: s.sev_id)
        ],
        "statuses": [
            {"status_id": s.status_id, "name": s.name, "rank": s.rank,
             "initial": s.initial, "terminal": s.terminal}
            for s in sorted(state.statuses.values(), key=lambda s: s.status_id)
        ],
        "graph_edges": [list(edge) for edge in sorted(state.graph_edges)],
        "bug_types": [
            {"type_id": t.type_id, "type_name": t.type_name, "type_desc": t.type_desc}
            for t in sorted(state.bug_types.values(), key=lambda t: t.type_id)
        ],
        "projects": [
            {"project_id": p.project_id, "project_name": p.project_name,
             "description": p.description, "status_text": p.status_text,
             "manager_id": p.manager_id}
            for p in sorted(state.projects.values(), key=lambda p: p.project_id)
        ],
        "modules": [
            {"module_id": m.module_id, "project_id": m.project_id, "name": m.name,
             "assignee_id": m.assignee_id}
            for m in sorted(state.modules.values(), key=lambda m: m.module_id)
        ],
        "assignments": [
            {"user_id": a.user_id, "project_id": a.project_id, "status_text": a.status_text}
            for a in sorted(state.assignments.values(),
                            key=lambda a: (a.user_id, a.project_id))
        ],
        "bugs": [
            {
                "bug_id": b.bug_id,
                "bug_name": b.bug_name,
                "project_id": b.project_id,
                "module_id": b.module_id,
                "type_id": b.type_id,
                "severity_id": b.severity_id,
                "status_id": b.status_id,
                "reporter_id": b.reporter_id,
                "assignee_id": b.assignee_id,
                "description": b.description,
                "created_at": b.created_at,
                "history": [
                    {"bug_id": h.bug_id, "from_status_id": h.from_status_id,
                     "to_status_id": h.to_status_id, "actor_id": h.actor_id,
                     "at": h.at, "comment": h.comment}
                    for h in b.history
                ],
            }
            for b in sorted(state.bugs.values(), key=lambda b: b.bug_id)
        ],
    }


def serialize_state(state: StoreState) -> str:
    """Canonical one-line JSON form; equal states serialize to equal bytes."""
    return json.dumps(state_to_dict(state), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def state_from_dict(body: str) -> StoreState:
    try:
        raw = json.loads(body)
    except json.JSONDecodeError as exc:
        raise JournalError(f"snapshot body is not valid JSON ({exc.msg})")
    if not isinstance(raw, dict):
        raise JournalError("snapshot body must be an object")
    try:
        users = {
            u["user_id"]: User(
                user_id=u["user_id"],
                username=u["username"],
                role=Role(u["role"]),
                active=u["active"],
                credential=_decode_credential(u.get("credential")),
            )
            for u in raw["users"]
        }
        severities = {
            s["sev_id"]: SeverityLevel(s["sev_id"], s["name"], s["rank"], s["description"])
            for s in raw["severities"]
        }
        statuses = {
            s["status_id"]: StatusLevel(s["status_id"], s["name"], s["rank"],
                                        s["initial"], s["terminal"])
            for s in raw["statuses"]
        }
        bug_types = {
            t["type_id"]: BugType(t["type_id"], t["type_name"], t["type_desc"])
            for t in raw["bug_types"]
        }
        projects = {
            p["project_id"]: Project(p["project_id"], p["project_name"], p["description"],
                                     p["status_text"], p["manager_id"])
            for p in raw["projects"]
        }
        modules = {
            m["module_id"]: ProjectModule(m["module_id"], m["project_id"], m["name"],
                                          m["assignee_id"])
            for m in raw["modules"]
        }
        assignments = {
            (a["user_id"], a["project_id"]): Assignment(a["user_id"], a["project_id"],
                                                        a["status_text"])
            for a in raw["assignments"]
        }
        bugs = {
            b["bug_id"]: Bug(
                bug_id=b["bug_id"],
                bug_name=b["bug_name"],
                project_id=b["project_id"],
                type_id=b["type_id"],
                severity_id=b["severity_id"],
                status_id=b["status_id"],
                reporter_id=b["reporter_id"],
                created_at=b["created_at"],
                description=b["description"],
                module_id=b["module_id"],
                assignee_id=b["assignee_id"],
                history=tuple(
                    TransitionEvent(h["bug_id"], h["from_status_id"], h["to_status_id"],
                                    h["actor_id"], h["at"], h["comment"])
                    for h in b["history"]
                ),
            )
            for b in raw["bugs"]
        }
        return StoreState(
            users=users,
            severities=severities,
            statuses=statuses,
            graph_edges=frozenset((f, t) for f, t in raw["graph_edges"]),
            bug_types=bug_types,
            projects=projects,
            modules=modules,
            assignments=assignments,
            bugs=bugs,
            last_seq=raw["last_seq"],
            last_ts=raw["last_ts"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise JournalError(f"snapshot body is malformed: {exc}")


def snapshot_state(state: StoreState) -> bytes:
    header = f"{SNAPSHOT_MAGIC} seq={state.last_seq}"
    return (header + "\n" + serialize_state(state) + "\n").encode("utf-8")


def load_snapshot(data: bytes) -> StoreState:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise JournalError("snapshot is not valid UTF-8")
    header, _, body = text.partition("\n")
    if not header.startswith(SNAPSHOT_MAGIC + " seq="):
        raise JournalError("snapshot header missing or malformed")
    try:
        seq = int(header.rsplit("=", 1)[1])
    except ValueError:
        raise JournalError("snapshot header carries a non-integer seq")
    state = state_from_dict(body)
    if state.last_seq != seq:
        raise JournalError(
            f"snapshot header seq={seq} disagrees with state seq={state.last_seq}"
        )
    return state


def compact(snapshot_data: bytes, tail: bytes) -> StoreState:
    """Rebuild the state a full replay would produce from a snapshot plus
    the journal suffix that follows it."""
    state = load_snapshot(snapshot_data)
    text = tail.decode("utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if lines:
        first = decode_event(lines[0], 1)
        if first.seq != state.last_seq + 1:
            raise SnapshotMismatch(
                f"tail begins at seq {first.seq}, snapshot covers up to {state.last_seq}"
            )
    for lineno, event in enumerate(parse_journal(tail, first_seq=state.last_seq + 1), start=1):
        try:
            state = apply_event(state, event)
        except ValidationFailed as exc:
            raise JournalError(f"tail line {lineno}: event rejected during replay: {exc.message}")
    return state


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class Store:
    """Single-writer journal-backed store.

    All mutation funnels through ``append`` under ``lock``; readers take
    the immutable ``state`` snapshot and work lock-free. Timestamps are
    clamped to be non-decreasing across the journal.
    """

    def __init__(self, data_dir, clock: Optional[Callable[[], datetime]] = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.data_dir / JOURNAL_FILENAME
        self.snapshot_path = self.data_dir / SNAPSHOT_FILENAME
        self.lock = threading.RLock()
        self.clock = clock or _utc_now
        if self.journal_path.exists():
            self._state = replay(self.journal_path.read_bytes())
        else:
            self.journal_path.touch()
            self._state = bootstrap_state()
        self._file = open(self.journal_path, "a", encoding="utf-8", newline="")

    @property
    def state(self) -> StoreState:
        return self._state

    def _next_ts(self) -> str:
        ts = rfc3339(self.clock())
        if self._state.last_ts and parse_ts(ts) < parse_ts(self._state.last_ts):
            return self._state.last_ts
        return ts

    def append(self, kind: str, payload: dict, actor_id: int) -> Event:
        """Validate, persist, then publish one event.

        The fold runs first: a rejected command leaves the journal
        byte-identical. The line is flushed and fsynced before the new
        state becomes visible.
        """
        with self.lock:
            event = Event(
                seq=self._state.last_seq + 1,
                ts=self._next_ts(),
                actor_id=actor_id,
                kind=kind,
                payload=payload,
            )
            next_state = apply_event(self._state, event)
            line = encode_event(event) + "\n"
            try:
                self._file.write(line)
                self._file.flush()
                os.fsync(self._file.fileno())
            except OSError as exc:
                raise IoFailure(f"journal write failed: {exc}")
            self._state = next_state
            return event

    def save_snapshot(self) -> Path:
        """Write data/snapshot.bin covering the current seq."""
        with self.lock:
            data = snapshot_state(self._state)
        tmp = self.snapshot_path.with_suffix(".tmp")
        try:
            tmp.write_bytes(data)
            tmp.replace(self.snapshot_path)
        except OSError as exc:
            raise IoFailure(f"snapshot write failed: {exc}")
        return self.snapshot_path

    def close(self) -> None:
        with self.lock:
            try:
                self._file.flush()
                os.fsync(self._file.fileno())
            except (OSError, ValueError):
                pass
            self._file.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
