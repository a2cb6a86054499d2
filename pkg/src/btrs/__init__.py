"""Bug tracking and reporting service.

An event-sourced issue tracker: admin-managed master data, role-gated
workflows over a configurable bug lifecycle, severity-then-status triage
ordering, reporting with CSV export, and Basic COCOMO effort estimates —
served over HTTP with a scripting-friendly CLI client.
"""

from .domain import (
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
    compare_bugs,
    triage_key,
    validate_bug_record,
    validate_status_graph,
)
from .errors import BtrsError
from .store import Store, StoreState, compact, replay, snapshot_state

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Bug",
    "BugDraft",
    "BugType",
    "BtrsError",
    "Credential",
    "Project",
    "ProjectModule",
    "Role",
    "SeverityLevel",
    "StatusLevel",
    "Store",
    "StoreState",
    "TransitionEvent",
    "User",
    "compact",
    "compare_bugs",
    "replay",
    "snapshot_state",
    "triage_key",
    "validate_bug_record",
    "validate_status_graph",
    "__version__",
]
