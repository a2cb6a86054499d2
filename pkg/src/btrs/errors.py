"""Error taxonomy shared by the service, HTTP API, and CLI.

Every failure an operation can raise carries a stable machine code. The
HTTP layer maps codes to status lines and the CLI maps status lines to
exit codes, so the taxonomy here is the single source of truth.
"""

from __future__ import annotations


class BtrsError(Exception):
    """Base class for all domain failures.

    code: stable machine string, e.g. "PERMISSION_DENIED".
    details: optional list of {"field": ..., "rule": ...} records for
    validation failures.
    """

    code = "INTERNAL"

    def __init__(self, message: str, details: list[dict] | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or []


class PermissionDenied(BtrsError):
    code = "PERMISSION_DENIED"


class NotAssignee(BtrsError):
    code = "NOT_ASSIGNEE"


class NotAssignedToProject(BtrsError):
    code = "NOT_ASSIGNED_TO_PROJECT"


class InvalidCredentials(BtrsError):
    code = "INVALID_CREDENTIALS"

    def __init__(self):
        # Deliberately constant: unknown user, wrong password and inactive
        # account must be indistinguishable to the caller.
        super().__init__("invalid credentials")


class TokenMissing(BtrsError):
    code = "TOKEN_MISSING"


class TokenUnknown(BtrsError):
    code = "TOKEN_UNKNOWN"


class TokenExpired(BtrsError):
    code = "TOKEN_EXPIRED"


class ValidationFailed(BtrsError):
    code = "VALIDATION_FAILED"


class WeakPassword(BtrsError):
    code = "WEAK_PASSWORD"


class EmptyField(BtrsError):
    code = "EMPTY_FIELD"


class BadStatusText(BtrsError):
    code = "BAD_STATUS_TEXT"


class BadManagerRole(BtrsError):
    code = "BAD_MANAGER_ROLE"


class BadAssigneeRole(BtrsError):
    code = "BAD_ASSIGNEE_ROLE"


class GraphInvalid(BtrsError):
    code = "GRAPH_INVALID"


class NonpositiveKloc(BtrsError):
    code = "NONPOSITIVE_KLOC"


class UnknownMode(BtrsError):
    code = "UNKNOWN_MODE"


class UnknownReference(BtrsError):
    code = "UNKNOWN_REFERENCE"


class UnknownBug(BtrsError):
    code = "UNKNOWN_BUG"


class UnknownProject(BtrsError):
    code = "UNKNOWN_PROJECT"


class UnknownUser(BtrsError):
    code = "UNKNOWN_USER"


class DuplicateUsername(BtrsError):
    code = "DUPLICATE_USERNAME"


class DuplicateName(BtrsError):
    code = "DUPLICATE_NAME"


class RankCollision(BtrsError):
    code = "RANK_COLLISION"


class IllegalTransition(BtrsError):
    code = "ILLEGAL_TRANSITION"


class JournalError(BtrsError):
    """Journal bytes could not be replayed (corrupt line, seq gap, bad kind)."""

    code = "JOURNAL_CORRUPT"


class SnapshotMismatch(BtrsError):
    code = "SNAPSHOT_SEQ_MISMATCH"


class IoFailure(BtrsError):
    code = "IO_FAILURE"


# code -> HTTP status. The API layer refuses to serve an error whose code
# is not in this table, which keeps the documented set closed.
HTTP_STATUS_BY_CODE: dict[str, int] = {
    "INVALID_CREDENTIALS": 401,
    "TOKEN_MISSING": 401,
    "TOKEN_UNKNOWN": 401,
    "TOKEN_EXPIRED": 401,
    "PERMISSION_DENIED": 403,
    "NOT_ASSIGNEE": 403,
    "NOT_ASSIGNED_TO_PROJECT": 403,
    "NOT_FOUND": 404,
    "METHOD_NOT_ALLOWED": 405,
    "UNKNOWN_REFERENCE": 404,
    "UNKNOWN_BUG": 404,
    "UNKNOWN_PROJECT": 404,
    "UNKNOWN_USER": 404,
    "DUPLICATE_USERNAME": 409,
    "DUPLICATE_NAME": 409,
    "RANK_COLLISION": 409,
    "ILLEGAL_TRANSITION": 409,
    "VALIDATION_FAILED": 422,
    "WEAK_PASSWORD": 422,
    "EMPTY_FIELD": 422,
    "BAD_STATUS_TEXT": 422,
    "BAD_MANAGER_ROLE": 422,
    "BAD_ASSIGNEE_ROLE": 422,
    "GRAPH_INVALID": 422,
    "NONPOSITIVE_KLOC": 422,
    "UNKNOWN_MODE": 422,
    "JOURNAL_CORRUPT": 500,
    "SNAPSHOT_SEQ_MISMATCH": 500,
    "IO_FAILURE": 500,
    "INTERNAL": 500,
}
