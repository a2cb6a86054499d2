"""Password hashing, session tokens, and the role-permission matrix."""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Callable, Optional

from .domain import Credential, Role
from .errors import TokenExpired, TokenUnknown

DEFAULT_ITERATIONS = 100_000
DEFAULT_TOKEN_TTL = timedelta(hours=12)
MIN_PASSWORD_LENGTH = 8

# Closed action vocabulary. authorize() refuses names outside this set.
ACTIONS = (
    "manage_users",
    "upsert_severity",
    "upsert_status",
    "upsert_status_graph",
    "create_bug_type",
    "create_project",
    "add_module",
    "assign_project",
    "set_project_status",
    "report_bug",
    "transition_bug",
    "assign_bug",
    "view_reports",
    "estimate_cost",
)


def hash_password(password: str, iterations: int = DEFAULT_ITERATIONS,
                  salt: Optional[bytes] = None) -> Credential:
    if salt is None:
        salt = secrets.token_bytes(16)
    verifier = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return Credential(salt=salt, verifier=verifier, iterations=iterations)


def verify_password(credential: Optional[Credential], password: str) -> bool:
    """Constant-time verifier comparison; a user without a credential never matches."""
    if credential is None:
        return False
    candidate = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), credential.salt, credential.iterations
    )
    return hmac.compare_digest(candidate, credential.verifier)


class PermissionMatrix:
    """Total (role, action) -> allow/deny table."""

    def __init__(self, allowed: dict[Role, frozenset[str]]):
        for role in Role:
            if role not in allowed:
                raise ValueError(f"matrix missing role {role.value}")
            unknown = allowed[role] - set(ACTIONS)
            if unknown:
                raise ValueError(f"matrix names unknown actions: {sorted(unknown)}")
        if allowed[Role.ADMIN] != frozenset(ACTIONS):
            raise ValueError("ADMIN row must allow every action")
        self._allowed = allowed

    def is_allowed(self, role: Role, action: str) -> bool:
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        return action in self._allowed[role]

    def allowed_actions(self, role: Role) -> frozenset[str]:
        return self._allowed[role]


# Managers run projects end to end; developers only report and work their
# own bugs (op-level scoping narrows transition_bug and view_reports
# further). Everything not granted is denied.
DEFAULT_MATRIX = PermissionMatrix({
    Role.ADMIN: frozenset(ACTIONS),
    Role.MANAGER: frozenset({
        "create_project",
        "add_module",
        "assign_project",
        "set_project_status",
        "assign_bug",
        "transition_bug",
        "report_bug",
        "view_reports",
        "estimate_cost",
    }),
    Role.DEVELOPER: frozenset({
        "report_bug",
        "transition_bug",
        "view_reports",
    }),
})


@dataclass(frozen=True)
class Session:
    token: str
    user_id: int
    issued_at: datetime
    expires_at: datetime


class SessionTable:
    """In-memory token table. Tokens are ephemeral: they do not survive
    a restart and are never written to the journal."""

    def __init__(self, ttl: timedelta = DEFAULT_TOKEN_TTL,
                 clock: Optional[Callable[[], datetime]] = None):
        self._ttl = ttl
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def issue(self, user_id: int) -> Session:
        now = self._clock()
        session = Session(
            token=secrets.token_urlsafe(32),
            user_id=user_id,
            issued_at=now,
            expires_at=now + self._ttl,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def resolve(self, token: str) -> Session:
        """Return the live session for ``token``; expired tokens are dropped."""
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                raise TokenUnknown("unknown session token")
            if self._clock() >= session.expires_at:
                del self._sessions[token]
                raise TokenExpired("session token expired")
            return session

    def revoke(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)
