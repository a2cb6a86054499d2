"""Authorized operations over the event store.

Every mutating operation here follows the same shape: check the
permission matrix (plus any role-scoped rule), validate the command
against a consistent state snapshot, then append the event under the
store's write lock. Reads work on the immutable snapshot and never touch
the journal.
"""

from __future__ import annotations

from datetime import timedelta
from typing import Optional

from . import estimation, reporting
from .auth import (
    DEFAULT_ITERATIONS,
    DEFAULT_MATRIX,
    DEFAULT_TOKEN_TTL,
    MIN_PASSWORD_LENGTH,
    PermissionMatrix,
    Session,
    SessionTable,
    hash_password,
    verify_password,
)
from .domain import (
    PROJECT_STATUS_VALUES,
    Assignment,
    Bug,
    BugDraft,
    BugType,
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
from .errors import (
    BadAssigneeRole,
    BadManagerRole,
    BadStatusText,
    DuplicateName,
    DuplicateUsername,
    EmptyField,
    GraphInvalid,
    IllegalTransition,
    InvalidCredentials,
    NotAssignedToProject,
    NotAssignee,
    PermissionDenied,
    RankCollision,
    UnknownBug,
    UnknownProject,
    UnknownReference,
    UnknownUser,
    ValidationFailed,
    WeakPassword,
)
from .store import BOOTSTRAP_ADMIN_ID, Store, StoreState, encode_credential


class BugTracker:
    """Application service: the one place commands are authorized and applied."""

    def __init__(self, store: Store, *,
                 matrix: PermissionMatrix = DEFAULT_MATRIX,
                 token_ttl: timedelta = DEFAULT_TOKEN_TTL,
                 password_iterations: int = DEFAULT_ITERATIONS,
                 cocomo_coefficients: Optional[dict[str, tuple[float, float]]] = None):
        self._store = store
        self._matrix = matrix
        self._iterations = password_iterations
        self._cocomo = cocomo_coefficients or estimation.DEFAULT_COEFFICIENTS
        self._sessions = SessionTable(ttl=token_ttl, clock=store.clock)

    @property
    def state(self) -> StoreState:
        return self._store.state

    @property
    def store(self) -> Store:
        return self._store

    @property
    def matrix(self) -> PermissionMatrix:
        return self._matrix

    # -- bootstrap ----------------------------------------------------------

    @property
    def admin_password_initialized(self) -> bool:
        return self.state.users[BOOTSTRAP_ADMIN_ID].credential is not None

    def init_admin_password(self, password: str) -> User:
        """First-start initialization of the built-in admin's password."""
        self._check_password(password)
        with self._store.lock:
            admin = self.state.users[BOOTSTRAP_ADMIN_ID]
            if admin.credential is not None:
                raise ValidationFailed("admin password is already initialized")
            credential = hash_password(password, self._iterations)
            self._store.append("UserCreated", {
                "user_id": admin.user_id,
                "username": admin.username,
                "role": admin.role.value,
                "active": True,
                "credential": encode_credential(credential),
            }, actor_id=0)
        return self.state.users[BOOTSTRAP_ADMIN_ID]

    # -- authentication -----------------------------------------------------

    def login(self, username: str, password: str) -> Session:
        """Issue a session token. Unknown user, wrong password and inactive
        account all fail identically (no user enumeration)."""
        user = self.state.user_by_name(username)
        if user is None or not user.active or not verify_password(user.credential, password):
            raise InvalidCredentials()
        with self._store.lock:
            return self._sessions.issue(user.user_id)

    def logout(self, token: str) -> None:
        with self._store.lock:
            self._sessions.revoke(token)

    def resolve_token(self, token: str) -> User:
        """Map a live token to its active user, without an action check."""
        session = self._sessions.resolve(token)
        user = self.state.users.get(session.user_id)
        if user is None or not user.active:
            raise InvalidCredentials()
        return user

    def authorize(self, token: str, action: str) -> User:
        """Resolve the token and check the permission matrix; returns the
        acting user on allow."""
        user = self.resolve_token(token)
        self._check_permission(user, action)
        return user

    def _check_permission(self, actor: User, action: str) -> None:
        if not self._matrix.is_allowed(actor.role, action):
            raise PermissionDenied(f"role {actor.role.value} may not {action}")

    def _check_password(self, password: str) -> None:
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPassword(f"password must be at least {MIN_PASSWORD_LENGTH} characters")

    # -- user management ----------------------------------------------------

    def register_user(self, actor: User, username: str, password: str, role: Role) -> User:
        self._check_permission(actor, "manage_users")
        if not username.strip():
            raise EmptyField("username must be non-empty")
        self._check_password(password)
        credential = hash_password(password, self._iterations)
        with self._store.lock:
            state = self.state
            if state.user_by_name(username) is not None:
                raise DuplicateUsername(f"username {username!r} already taken")
            user_id = state.next_id(state.users)
            self._store.append("UserCreated", {
                "user_id": user_id,
                "username": username,
                "role": role.value,
                "active": True,
                "credential": encode_credential(credential),
            }, actor_id=actor.user_id)
        return self.state.users[user_id]

    def list_users(self, actor: User) -> list[User]:
        self._check_permission(actor, "manage_users")
        return sorted(self.state.users.values(), key=lambda u: u.user_id)

    # -- master data --------------------------------------------------------

    def upsert_severity(self, actor: User, sev_id: int, name: str, rank: int,
                        description: str = "") -> SeverityLevel:
        """Insert or replace a severity level by id. Bugs referencing the id
        pick up the new name/rank transparently."""
        self._check_permission(actor, "upsert_severity")
        if not name.strip():
            raise EmptyField("severity name must be non-empty")
        if not isinstance(rank, int) or rank < 1:
            raise ValidationFailed("severity rank must be a positive integer")
        with self._store.lock:
            for other in self.state.severities.values():
                if other.sev_id == sev_id:
                    continue
                if other.rank == rank:
                    raise RankCollision(f"rank {rank} already used by {other.name}")
                if other.name == name:
                    raise DuplicateName(f"severity name {name!r} already used")
            self._store.append("SeverityUpserted", {
                "level": {"sev_id": sev_id, "name": name, "rank": rank,
                          "description": description},
            }, actor_id=actor.user_id)
        return self.state.severities[sev_id]

    def upsert_status(self, actor: User, level: StatusLevel,
                      edges: set[tuple[int, int]]) -> tuple[StatusLevel, frozenset]:
        """Upsert one status level together with the full transition graph,
        atomically: either both apply or neither."""
        return self._apply_status_config(actor, [level], edges)[0], self.state.graph_edges

    def replace_status_config(self, actor: User, levels: list[StatusLevel],
                              edges: set[tuple[int, int]]) -> list[StatusLevel]:
        """Upsert several levels plus the graph in one atomic event; the only
        way to configure a lifecycle from empty tables."""
        return self._apply_status_config(actor, levels, edges)

    def _apply_status_config(self, actor: User, levels: list[StatusLevel],
                             edges) -> list[StatusLevel]:
        self._check_permission(actor, "upsert_status")
        with self._store.lock:
            candidate = dict(self.state.statuses)
            for level in levels:
                candidate[level.status_id] = level
            result = validate_status_graph(candidate.values(), edges)
            if not result.ok:
                raise GraphInvalid("status graph invalid: " + "; ".join(result.messages()),
                                   details=[e.as_dict() for e in result.errors])
            self._store.append("StatusUpserted", {
                "levels": [
                    {"status_id": lv.status_id, "name": lv.name, "rank": lv.rank,
                     "initial": lv.initial, "terminal": lv.terminal}
                    for lv in levels
                ],
                "graph": {"edges": sorted([f, t] for f, t in edges)},
            }, actor_id=actor.user_id)
        return [self.state.statuses[lv.status_id] for lv in levels]

    def update_status_graph(self, actor: User, edges) -> frozenset:
        """Replace only the edge set, keeping the level table."""
        self._check_permission(actor, "upsert_status_graph")
        with self._store.lock:
            result = validate_status_graph(self.state.statuses.values(), edges)
            if not result.ok:
                raise GraphInvalid("status graph invalid: " + "; ".join(result.messages()),
                                   details=[e.as_dict() for e in result.errors])
            self._store.append("GraphUpdated", {
                "graph": {"edges": sorted([f, t] for f, t in edges)},
            }, actor_id=actor.user_id)
        return self.state.graph_edges

    def create_bug_type(self, actor: User, name: str, desc: str) -> BugType:
        self._check_permission(actor, "create_bug_type")
        if not name.strip():
            raise EmptyField("type_name must be non-empty")
        if not desc.strip():
            raise EmptyField("type_desc must be non-empty")
        with self._store.lock:
            type_id = self.state.next_id(self.state.bug_types)
            self._store.append("BugTypeCreated", {
                "type_id": type_id, "type_name": name, "type_desc": desc,
            }, actor_id=actor.user_id)
        return self.state.bug_types[type_id]

    def create_project(self, actor: User, name: str, description: str,
                       manager_id: int) -> Project:
        self._check_permission(actor, "create_project")
        if not name.strip():
            raise EmptyField("project_name must be non-empty")
        with self._store.lock:
            state = self.state
            if any(p.project_name == name for p in state.projects.values()):
                raise DuplicateName(f"project name {name!r} already taken")
            manager = state.users.get(manager_id)
            if manager is None:
                raise UnknownReference(f"unknown user {manager_id}")
            if manager.role not in (Role.MANAGER, Role.ADMIN):
                raise BadManagerRole(
                    f"user {manager.username} has role {manager.role.value}, "
                    "projects need a MANAGER or ADMIN")
            project_id = state.next_id(state.projects)
            self._store.append("ProjectCreated", {
                "project_id": project_id,
                "project_name": name,
                "description": description,
                "status_text": "PLANNED",
                "manager_id": manager_id,
            }, actor_id=actor.user_id)
        return self.state.projects[project_id]

    def add_module(self, actor: User, project_id: int, name: str,
                   assignee_id: Optional[int] = None) -> ProjectModule:
        self._check_permission(actor, "add_module")
        if not name.strip():
            raise EmptyField("module name must be non-empty")
        with self._store.lock:
            state = self.state
            if project_id not in state.projects:
                raise UnknownProject(f"unknown project {project_id}")
            if any(m.project_id == project_id and m.name == name
                   for m in state.modules.values()):
                raise DuplicateName(f"module name {name!r} already used in this project")
            if assignee_id is not None:
                assignee = state.users.get(assignee_id)
                if assignee is None:
                    raise UnknownReference(f"unknown user {assignee_id}")
                if assignee.role != Role.DEVELOPER or not assignee.active:
                    raise BadAssigneeRole(
                        f"user {assignee.username} is not an active DEVELOPER")
            module_id = state.next_id(state.modules)
            self._store.append("ModuleAdded", {
                "module_id": module_id,
                "project_id": project_id,
                "name": name,
                "assignee_id": assignee_id,
            }, actor_id=actor.user_id)
        return self.state.modules[module_id]

    def assign_project(self, actor: User, user_id: int, project_id: int,
                       status_text: str) -> Assignment:
        """Upsert the (user, project) responsibility record."""
        self._check_permission(actor, "assign_project")
        self._check_status_text(status_text)
        with self._store.lock:
            state = self.state
            if user_id not in state.users:
                raise UnknownReference(f"unknown user {user_id}")
            if project_id not in state.projects:
                raise UnknownReference(f"unknown project {project_id}")
            self._store.append("ProjectAssigned", {
                "user_id": user_id,
                "project_id": project_id,
                "status_text": status_text,
            }, actor_id=actor.user_id)
        return self.state.assignments[(user_id, project_id)]

    def set_project_status(self, actor: User, project_id: int, status_text: str) -> Project:
        self._check_permission(actor, "set_project_status")
        self._check_status_text(status_text)
        with self._store.lock:
            if project_id not in self.state.projects:
                raise UnknownProject(f"unknown project {project_id}")
            self._store.append("ProjectStatusSet", {
                "project_id": project_id,
                "status_text": status_text,
            }, actor_id=actor.user_id)
        return self.state.projects[project_id]

    def _check_status_text(self, status_text: str) -> None:
        if status_text not in PROJECT_STATUS_VALUES:
            raise BadStatusText(
                f"status {status_text!r} not in {', '.join(PROJECT_STATUS_VALUES)}")

    # -- bug lifecycle ------------------------------------------------------

    def report_bug(self, actor: User, draft: BugDraft) -> Bug:
        """File a bug: validates the draft, allocates the id, and starts the
        lifecycle at the initial status."""
        self._check_permission(actor, "report_bug")
        if draft.status_id is not None:
            raise ValidationFailed(
                "status_id is set by the tracker, not the reporter",
                details=[{"field": "status_id", "rule": "must be omitted"}])
        with self._store.lock:
            state = self.state
            result = validate_bug_record(draft, state, require_status=False)
            if not result.ok:
                raise ValidationFailed(
                    "bug draft invalid: " + "; ".join(result.messages()),
                    details=[e.as_dict() for e in result.errors])
            if actor.role == Role.DEVELOPER:
                if (actor.user_id, draft.project_id) not in state.assignments:
                    raise NotAssignedToProject(
                        f"user {actor.username} is not assigned to project {draft.project_id}")
            initial = state.initial_status()
            if initial is None:
                raise ValidationFailed(
                    "no status levels configured; an admin must install the lifecycle first",
                    details=[{"field": "status_id", "rule": "no initial status configured"}])
            bug_id = state.next_id(state.bugs)
            self._store.append("BugReported", {
                "bug_id": bug_id,
                "bug_name": draft.bug_name,
                "project_id": draft.project_id,
                "module_id": draft.module_id,
                "type_id": draft.type_id,
                "severity_id": draft.severity_id,
                "status_id": initial.status_id,
                "reporter_id": actor.user_id,
                "assignee_id": None,
                "description": draft.description,
            }, actor_id=actor.user_id)
        return self.state.bugs[bug_id]

    def transition_bug(self, actor: User, bug_id: int, to_status_id: int,
                       comment: str = "") -> TransitionEvent:
        self._check_permission(actor, "transition_bug")
        with self._store.lock:
            state = self.state
            bug = state.bugs.get(bug_id)
            if bug is None:
                raise UnknownBug(f"unknown bug {bug_id}")
            if actor.role == Role.DEVELOPER and bug.assignee_id != actor.user_id:
                raise NotAssignee(
                    f"bug {bug_id} is not assigned to {actor.username}")
            if to_status_id not in state.statuses:
                raise UnknownReference(f"unknown status level {to_status_id}")
            if (bug.status_id, to_status_id) not in state.graph_edges:
                frm = state.statuses[bug.status_id].name
                to = state.statuses[to_status_id].name
                raise IllegalTransition(f"no edge {frm} -> {to} in the status graph")
            self._store.append("BugTransitioned", {
                "bug_id": bug_id,
                "from_status_id": bug.status_id,
                "to_status_id": to_status_id,
                "comment": comment,
            }, actor_id=actor.user_id)
        return self.state.bugs[bug_id].history[-1]

    def assign_bug(self, actor: User, bug_id: int, developer_id: int) -> Bug:
        """Set the bug's assignee. A bug still at the initial status also
        moves along the initial->ASSIGNED edge when the graph has one."""
        self._check_permission(actor, "assign_bug")
        with self._store.lock:
            state = self.state
            bug = state.bugs.get(bug_id)
            if bug is None:
                raise UnknownBug(f"unknown bug {bug_id}")
            developer = state.users.get(developer_id)
            if developer is None:
                raise UnknownReference(f"unknown user {developer_id}")
            if developer.role != Role.DEVELOPER or not developer.active:
                raise BadAssigneeRole(f"user {developer.username} is not an active DEVELOPER")
            transition = None
            initial = state.initial_status()
            if initial is not None and bug.status_id == initial.status_id:
                assigned = next((s for s in state.statuses.values() if s.name == "ASSIGNED"),
                                None)
                if assigned is not None and (initial.status_id, assigned.status_id) in state.graph_edges:
                    transition = {"from_status_id": initial.status_id,
                                  "to_status_id": assigned.status_id}
            self._store.append("BugAssigned", {
                "bug_id": bug_id,
                "assignee_id": developer_id,
                "transition": transition,
            }, actor_id=actor.user_id)
        return self.state.bugs[bug_id]

    # -- queries ------------------------------------------------------------

    def triage_queue(self, viewer: User, project_id: Optional[int] = None,
                     assignee_id: Optional[int] = None,
                     open_only: bool = False) -> list[Bug]:
        """Bugs in triage order: severity rank, then status rank, then id.
        Developers see only bugs assigned to them."""
        self._check_permission(viewer, "view_reports")
        state = self.state
        if viewer.role == Role.DEVELOPER:
            if assignee_id is not None and assignee_id != viewer.user_id:
                raise PermissionDenied("developers may only view their own queue")
            assignee_id = viewer.user_id
        if project_id is not None and project_id not in state.projects:
            raise UnknownReference(f"unknown project {project_id}")
        if assignee_id is not None and assignee_id not in state.users:
            raise UnknownReference(f"unknown user {assignee_id}")

        terminal_ids = {s.status_id for s in state.statuses.values() if s.terminal}
        bugs = []
        for bug in state.bugs.values():
            if project_id is not None and bug.project_id != project_id:
                continue
            if assignee_id is not None and bug.assignee_id != assignee_id:
                continue
            if open_only and bug.status_id in terminal_ids:
                continue
            bugs.append(bug)
        bugs.sort(key=lambda b: (state.severities[b.severity_id].rank,
                                 state.statuses[b.status_id].rank,
                                 b.bug_id))
        return bugs

    def get_bug(self, viewer: User, bug_id: int) -> Bug:
        self._check_permission(viewer, "view_reports")
        bug = self.state.bugs.get(bug_id)
        if bug is None:
            raise UnknownBug(f"unknown bug {bug_id}")
        if viewer.role == Role.DEVELOPER:
            if viewer.user_id not in (bug.assignee_id, bug.reporter_id):
                raise PermissionDenied("developers may only view bugs in their own scope")
        return bug

    # -- reports ------------------------------------------------------------

    def severity_status_matrix(self, viewer: User,
                               project_id: Optional[int] = None) -> reporting.Report:
        self._check_permission(viewer, "view_reports")
        state = self.state
        if project_id is not None and project_id not in state.projects:
            raise UnknownProject(f"unknown project {project_id}")
        assignee_scope = viewer.user_id if viewer.role == Role.DEVELOPER else None
        return reporting.severity_status_matrix(
            state, self._now_ts(), project_id=project_id, assignee_id=assignee_scope)

    def user_workload(self, viewer: User, user_id: Optional[int] = None) -> reporting.Report:
        self._check_permission(viewer, "view_reports")
        if viewer.role == Role.DEVELOPER:
            if user_id is not None and user_id != viewer.user_id:
                raise PermissionDenied("developers may only view their own workload")
            user_id = viewer.user_id
        if user_id is not None and user_id not in self.state.users:
            raise UnknownUser(f"unknown user {user_id}")
        return reporting.user_workload(self.state, self._now_ts(), user_id=user_id)

    def project_summary(self, viewer: User, project_id: int) -> reporting.Report:
        self._check_permission(viewer, "view_reports")
        state = self.state
        if project_id not in state.projects:
            raise UnknownProject(f"unknown project {project_id}")
        if viewer.role == Role.DEVELOPER:
            if (viewer.user_id, project_id) not in state.assignments:
                raise PermissionDenied("developers may only view projects they are assigned to")
        return reporting.project_summary(state, project_id, self._now_ts())

    # -- estimation ---------------------------------------------------------

    def estimate(self, actor: User, kloc: float, mode: str) -> estimation.CocomoEstimate:
        self._check_permission(actor, "estimate_cost")
        return estimation.estimate(kloc, mode, self._cocomo)

    def _now_ts(self) -> str:
        # Reports are timestamped with the state's last event time, not the
        # wall clock, so identical state yields byte-identical exports.
        return self.state.last_ts or "1970-01-01T00:00:00.000000+00:00"
