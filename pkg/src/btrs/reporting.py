"""Report builders and exports.

Reports are pure functions of a state snapshot. Row ordering is fixed per
kind so identical state always yields identical output, and every count
is a plain non-negative integer so the cross-total consistency checks
stay exact.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

Cell = object  # str or int


@dataclass(frozen=True)
class Report:
    kind: str  # SEVERITY_STATUS_MATRIX | USER_WORKLOAD | PROJECT_SUMMARY
    generated_at: str
    filters: dict
    columns: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "generated_at": self.generated_at,
            "filters": self.filters,
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
        }


def _scoped_bugs(state, project_id: Optional[int], assignee_id: Optional[int]):
    bugs = state.bugs.values()
    if project_id is not None:
        bugs = [b for b in bugs if b.project_id == project_id]
    if assignee_id is not None:
        bugs = [b for b in bugs if b.assignee_id == assignee_id]
    return list(bugs)


def severity_status_matrix(state, generated_at: str, project_id: Optional[int] = None,
                           assignee_id: Optional[int] = None) -> Report:
    """Severity x status counts with trailing row/column totals.

    One row per severity level (rank ascending), one column per status
    level (rank ascending); the bottom-right cell is the grand total.
    """
    severities = sorted(state.severities.values(), key=lambda s: s.rank)
    statuses = sorted(state.statuses.values(), key=lambda s: s.rank)
    bugs = _scoped_bugs(state, project_id, assignee_id)

    columns = ("severity",) + tuple(s.name for s in statuses) + ("total",)
    rows = []
    col_totals = {s.status_id: 0 for s in statuses}
    grand = 0
    for sev in severities:
        cells: list[Cell] = [sev.name]
        row_total = 0
        for status in statuses:
            count = sum(1 for b in bugs
                        if b.severity_id == sev.sev_id and b.status_id == status.status_id)
            cells.append(count)
            row_total += count
            col_totals[status.status_id] += count
        cells.append(row_total)
        grand += row_total
        rows.append(tuple(cells))
    totals: list[Cell] = ["total"]
    totals.extend(col_totals[s.status_id] for s in statuses)
    totals.append(grand)
    rows.append(tuple(totals))

    return Report(
        kind="SEVERITY_STATUS_MATRIX",
        generated_at=generated_at,
        filters={"project_id": project_id, "assignee_id": assignee_id},
        columns=columns,
        rows=tuple(rows),
    )


def user_workload(state, generated_at: str, user_id: Optional[int] = None) -> Report:
    """One row per project assignment: its status plus the open (non-terminal)
    and resolved (terminal) counts of bugs assigned to that user there."""
    terminal_ids = {s.status_id for s in state.statuses.values() if s.terminal}
    assignments = state.assignments.values()
    if user_id is not None:
        assignments = [a for a in assignments if a.user_id == user_id]

    def sort_key(a):
        return (state.users[a.user_id].username, state.projects[a.project_id].project_name)

    rows = []
    for a in sorted(assignments, key=sort_key):
        mine = [b for b in state.bugs.values()
                if b.project_id == a.project_id and b.assignee_id == a.user_id]
        open_count = sum(1 for b in mine if b.status_id not in terminal_ids)
        resolved_count = sum(1 for b in mine if b.status_id in terminal_ids)
        rows.append((
            state.users[a.user_id].username,
            state.projects[a.project_id].project_name,
            a.status_text,
            open_count,
            resolved_count,
        ))

    return Report(
        kind="USER_WORKLOAD",
        generated_at=generated_at,
        filters={"user_id": user_id},
        columns=("username", "project", "assignment_status", "open_bugs", "resolved_bugs"),
        rows=tuple(rows),
    )


def project_summary(state, project_id: int, generated_at: str) -> Report:
    """Labeled field/value rows describing one project."""
    project = state.projects[project_id]
    modules = sorted(
        (m for m in state.modules.values() if m.project_id == project_id),
        key=lambda m: m.name,
    )
    bugs = [b for b in state.bugs.values() if b.project_id == project_id]
    terminal_ids = {s.status_id for s in state.statuses.values() if s.terminal}
    open_ids = sorted(b.bug_id for b in bugs if b.status_id not in terminal_ids)

    rows: list[tuple[Cell, Cell]] = [
        ("project_name", project.project_name),
        ("status", project.status_text),
        ("manager", state.users[project.manager_id].username),
        ("module_count", len(modules)),
    ]
    for module in modules:
        assignee = ""
        if module.assignee_id is not None:
            assignee = state.users[module.assignee_id].username
        rows.append((f"module:{module.name}", assignee))
    for sev in sorted(state.severities.values(), key=lambda s: s.rank):
        count = sum(1 for b in bugs if b.severity_id == sev.sev_id)
        rows.append((f"severity:{sev.name}", count))
    rows.append(("total_bugs", len(bugs)))
    rows.append(("oldest_open_bug_id", open_ids[0] if open_ids else ""))

    return Report(
        kind="PROJECT_SUMMARY",
        generated_at=generated_at,
        filters={"project_id": project_id},
        columns=("field", "value"),
        rows=tuple(rows),
    )


def export_csv(report: Report) -> bytes:
    """RFC 4180 encoding: header row, comma separator, double-quote escaping,
    CRLF line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def export_json(report: Report) -> bytes:
    """Compact object form mirroring the Report fields one to one."""
    return json.dumps(report.as_dict(), separators=(",", ":"), ensure_ascii=False).encode("utf-8")
