"""Core domain model: entities, triage ordering, and validation rules.

Everything in this module is immutable and side-effect free. Mutation
lives in the event store; these types are what the store's fold produces.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional

PROJECT_STATUS_VALUES = ("PLANNED", "ACTIVE", "ON_HOLD", "COMPLETED")


class Role(str, Enum):
    ADMIN = "ADMIN"
    MANAGER = "MANAGER"
    DEVELOPER = "DEVELOPER"


@dataclass(frozen=True, slots=True)
class Credential:
    """Salted iterated-hash password verifier. Never serialized to API callers."""

    salt: bytes
    verifier: bytes
    iterations: int


@dataclass(frozen=True, slots=True)
class User:
    user_id: int
    username: str
    role: Role
    active: bool = True
    credential: Optional[Credential] = None


@dataclass(frozen=True, slots=True)
class SeverityLevel:
    sev_id: int
    name: str
    rank: int  # 1 = most severe; first triage key
    description: str = ""


@dataclass(frozen=True, slots=True)
class StatusLevel:
    status_id: int
    name: str
    rank: int  # second triage key
    initial: bool = False
    terminal: bool = False


@dataclass(frozen=True, slots=True)
class BugType:
    type_id: int
    type_name: str
    type_desc: str


@dataclass(frozen=True, slots=True)
class Project:
    project_id: int
    project_name: str
    description: str
    status_text: str  # one of PROJECT_STATUS_VALUES, stored as text
    manager_id: int


@dataclass(frozen=True, slots=True)
class ProjectModule:
    module_id: int
    project_id: int
    name: str
    assignee_id: Optional[int] = None


@dataclass(frozen=True, slots=True)
class Assignment:
    user_id: int
    project_id: int
    status_text: str


@dataclass(frozen=True, slots=True)
class TransitionEvent:
    bug_id: int
    from_status_id: Optional[int]  # None only for the creation entry
    to_status_id: int
    actor_id: int
    at: str  # RFC 3339 UTC timestamp
    comment: str = ""


@dataclass(frozen=True, slots=True)
class Bug:
    bug_id: int
    bug_name: str
    project_id: int
    type_id: int
    severity_id: int
    status_id: int
    reporter_id: int
    created_at: str
    description: str = ""
    module_id: Optional[int] = None
    assignee_id: Optional[int] = None
    history: tuple[TransitionEvent, ...] = ()


@dataclass(frozen=True, slots=True)
class BugDraft:
    """Unpersisted bug submission; report_bug allocates id and initial status."""

    bug_name: str = ""
    project_id: Optional[int] = None
    type_id: Optional[int] = None
    severity_id: Optional[int] = None
    status_id: Optional[int] = None
    module_id: Optional[int] = None
    description: str = ""


@dataclass(frozen=True)
class FieldError:
    field: str
    rule: str

    def as_dict(self) -> dict:
        return {"field": self.field, "rule": self.rule}


@dataclass(frozen=True)
class ValidationResult:
    errors: tuple[FieldError, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def messages(self) -> list[str]:
        return [f"{e.field}: {e.rule}" for e in self.errors]


def _ok() -> ValidationResult:
    return ValidationResult()


def _fail(errors: Iterable[FieldError]) -> ValidationResult:
    return ValidationResult(tuple(errors))


def validate_bug_record(draft: BugDraft, view, *, require_status: bool = True,
                        bug_id: Optional[int] = 0) -> ValidationResult:
    """Field-by-field check of a bug record against current master data.

    ``view`` is anything exposing ``projects``, ``bug_types``,
    ``severities``, ``statuses`` and ``modules`` mappings keyed by id;
    tests hand-build minimal views. Validation outcomes are values: every
    offending field yields one FieldError naming the field and the
    violated rule. ``require_status`` is False when the caller will set
    the initial status itself; ``bug_id`` is the id about to be (or
    already) attached, 0 meaning "allocated later" and None meaning
    "missing" (rejected).
    """
    errors: list[FieldError] = []

    if bug_id is None or (bug_id != 0 and (not isinstance(bug_id, int) or bug_id < 1)):
        errors.append(FieldError("bug_id", "must be present and positive"))

    if not isinstance(draft.bug_name, str) or not draft.bug_name.strip():
        errors.append(FieldError("bug_name", "must be non-empty"))

    if draft.project_id is None:
        errors.append(FieldError("project_id", "must be present"))
    else:
        project = view.projects.get(draft.project_id)
        if project is None:
            errors.append(FieldError("project_id", f"unknown project {draft.project_id}"))
        elif not project.project_name.strip():
            errors.append(FieldError("project_name", "referenced project has empty name"))

    if draft.type_id is None:
        errors.append(FieldError("type_id", "must be present"))
    elif draft.type_id not in view.bug_types:
        errors.append(FieldError("type_id", f"unknown bug type {draft.type_id}"))

    if draft.severity_id is None:
        errors.append(FieldError("severity_id", "must be present"))
    elif draft.severity_id not in view.severities:
        errors.append(FieldError("severity_id", f"unknown severity level {draft.severity_id}"))

    if draft.status_id is None:
        if require_status:
            errors.append(FieldError("status_id", "must be present"))
    elif draft.status_id not in view.statuses:
        errors.append(FieldError("status_id", f"unknown status level {draft.status_id}"))

    if draft.module_id is not None:
        module = view.modules.get(draft.module_id)
        if module is None:
            errors.append(FieldError("module_id", f"unknown module {draft.module_id}"))
        elif draft.project_id is not None and module.project_id != draft.project_id:
            errors.append(FieldError("module_id", "module belongs to a different project"))

    return _fail(errors) if errors else _ok()


def triage_key(bug: Bug, severities: Mapping[int, SeverityLevel],
               statuses: Mapping[int, StatusLevel]) -> tuple[int, int, int]:
    """Sort key realizing the triage order: severity rank, status rank, bug id.

    Rank 1 is the most severe, so plain ascending sort puts the worst
    bug first. Raises KeyError naming the unresolved id.
    """
    sev = severities.get(bug.severity_id)
    if sev is None:
        raise KeyError(f"unknown severity level {bug.severity_id}")
    status = statuses.get(bug.status_id)
    if status is None:
        raise KeyError(f"unknown status level {bug.status_id}")
    return (sev.rank, status.rank, bug.bug_id)


def compare_bugs(a: Bug, b: Bug, severities: Mapping[int, SeverityLevel],
                 statuses: Mapping[int, StatusLevel]) -> int:
    """Total order on bugs: -1 when a triages before b, 0 only for the same id."""
    ka = triage_key(a, severities, statuses)
    kb = triage_key(b, severities, statuses)
    return -1 if ka < kb else (1 if ka > kb else 0)


def validate_status_graph(levels: Iterable[StatusLevel],
                          edges: Iterable[tuple[int, int]]) -> ValidationResult:
    """Check a candidate status configuration.

    Rules: unique ids/names/ranks, exactly one initial level, no
    self-loops, edge endpoints exist, the initial level has at least one
    outgoing edge, and every level can reach some terminal level. An
    empty configuration is accepted: it is the unconfigured pre-state and
    no bug can exist against it.
    """
    levels = list(levels)
    edge_set = {(int(f), int(t)) for f, t in edges}
    if not levels and not edge_set:
        return _ok()

    errors: list[FieldError] = []
    by_id: dict[int, StatusLevel] = {}
    seen_names: set[str] = set()
    seen_ranks: set[int] = set()
    for level in levels:
        if level.status_id in by_id:
            errors.append(FieldError("status_id", f"duplicate status id {level.status_id}"))
        by_id[level.status_id] = level
        if not level.name.strip():
            errors.append(FieldError("name", f"status {level.status_id} has empty name"))
        if level.name in seen_names:
            errors.append(FieldError("name", f"duplicate status name {level.name!r}"))
        seen_names.add(level.name)
        if level.rank in seen_ranks:
            errors.append(FieldError("rank", f"duplicate status rank {level.rank}"))
        seen_ranks.add(level.rank)

    initials = [lv for lv in levels if lv.initial]
    if not initials:
        errors.append(FieldError("initial", "no initial status"))
    elif len(initials) > 1:
        names = ", ".join(lv.name for lv in initials)
        errors.append(FieldError("initial", f"multiple initial statuses: {names}"))

    for frm, to in sorted(edge_set):
        if frm == to:
            name = by_id[frm].name if frm in by_id else frm
            errors.append(FieldError("edges", f"self-loop on {name}"))
        if frm not in by_id:
            errors.append(FieldError("edges", f"edge from unknown status {frm}"))
        if to not in by_id:
            errors.append(FieldError("edges", f"edge to unknown status {to}"))

    if errors:
        return _fail(errors)

    out: dict[int, set[int]] = {lv.status_id: set() for lv in levels}
    for frm, to in edge_set:
        out[frm].add(to)

    initial = initials[0]
    if not out[initial.status_id]:
        errors.append(FieldError("edges", f"initial status {initial.name} has no outgoing edge"))

    terminals = {lv.status_id for lv in levels if lv.terminal}
    for level in levels:
        if not _reaches_any(level.status_id, terminals, out):
            errors.append(FieldError("edges", f"{level.name} cannot reach a terminal status"))

    return _fail(errors) if errors else _ok()


def _reaches_any(start: int, targets: set[int], out: Mapping[int, set[int]]) -> bool:
    if start in targets:
        return True
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in out.get(node, ()):
            if nxt in targets:
                return True
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return False


# Default master data. The tracker boots with empty tables; an admin
# typically installs these via `btrs severity set --defaults` and
# `btrs status set --defaults`.

DEFAULT_SEVERITIES = (
    SeverityLevel(1, "Blocker", 1, "Halts all work on the project"),
    SeverityLevel(2, "Critical", 2, "Breaks a core workflow, no workaround"),
    SeverityLevel(3, "Major", 3, "Breaks a core workflow, workaround exists"),
    SeverityLevel(4, "Minor", 4, "Degrades a secondary workflow"),
    SeverityLevel(5, "Trivial", 5, "Cosmetic"),
)

DEFAULT_STATUSES = (
    StatusLevel(1, "NEW", 1, initial=True),
    StatusLevel(2, "ASSIGNED", 2),
    StatusLevel(3, "IN_PROGRESS", 3),
    StatusLevel(4, "RESOLVED", 4),
    StatusLevel(5, "VERIFIED", 5),
    StatusLevel(6, "CLOSED", 6, terminal=True),
    StatusLevel(7, "REOPENED", 7),
)

_S = {lv.name: lv.status_id for lv in DEFAULT_STATUSES}
DEFAULT_GRAPH_EDGES = frozenset({
    (_S["NEW"], _S["ASSIGNED"]),
    (_S["NEW"], _S["CLOSED"]),
    (_S["ASSIGNED"], _S["IN_PROGRESS"]),
    (_S["ASSIGNED"], _S["NEW"]),
    (_S["IN_PROGRESS"], _S["RESOLVED"]),
    (_S["IN_PROGRESS"], _S["ASSIGNED"]),
    (_S["RESOLVED"], _S["VERIFIED"]),
    (_S["RESOLVED"], _S["REOPENED"]),
    (_S["VERIFIED"], _S["CLOSED"]),
    (_S["CLOSED"], _S["REOPENED"]),
    (_S["REOPENED"], _S["ASSIGNED"]),
})
del _S
