// Session state and role gating. The allow-sets mirror the server's
// permission matrix exactly; the UI never offers a control the server
// would deny (the server still enforces on every call).

import type { Role, SessionInfo } from "./api.js";

export interface ViewSession {
  token: string;
  userId: number;
  username: string;
  role: Role;
  projectScope: number | null;
}

export type Action =
  | "manage_users"
  | "upsert_severity"
  | "upsert_status"
  | "upsert_status_graph"
  | "create_bug_type"
  | "create_project"
  | "add_module"
  | "assign_project"
  | "set_project_status"
  | "report_bug"
  | "transition_bug"
  | "assign_bug"
  | "view_reports"
  | "estimate_cost";

const ALL_ACTIONS: Action[] = [
  "manage_users", "upsert_severity", "upsert_status", "upsert_status_graph",
  "create_bug_type", "create_project", "add_module", "assign_project",
  "set_project_status", "report_bug", "transition_bug", "assign_bug",
  "view_reports", "estimate_cost",
];

const ALLOWED: Record<Role, Set<Action>> = {
  ADMIN: new Set(ALL_ACTIONS),
  MANAGER: new Set([
    "create_project", "add_module", "assign_project", "set_project_status",
    "assign_bug", "transition_bug", "report_bug", "view_reports", "estimate_cost",
  ]),
  DEVELOPER: new Set(["report_bug", "transition_bug", "view_reports"]),
};

export function can(session: ViewSession, action: Action): boolean {
  return ALLOWED[session.role].has(action);
}

export function sessionFrom(info: SessionInfo): ViewSession {
  return {
    token: info.token,
    userId: info.user_id,
    username: info.username,
    role: info.role,
    projectScope: null,
  };
}

export interface NavItem {
  route: string;
  label: string;
}

// Navigation is derived from the matrix: the admin console appears only
// for roles allowed to edit master data.
export function visibleNav(session: ViewSession): NavItem[] {
  const items: NavItem[] = [
    { route: "#/board", label: "Triage board" },
    { route: "#/reports", label: "Reports" },
  ];
  if (can(session, "manage_users") && can(session, "upsert_severity")) {
    items.push({ route: "#/admin", label: "Admin console" });
  }
  return items;
}

const STORAGE_KEY = "btrs-session";

export function saveSession(session: ViewSession): void {
  sessionStorage.setItem(STORAGE_KEY, JSON.stringify(session));
}

export function loadSession(): ViewSession | null {
  const raw = sessionStorage.getItem(STORAGE_KEY);
  if (!raw) return null;
  try {
    return JSON.parse(raw) as ViewSession;
  } catch {
    return null;
  }
}

export function clearSession(): void {
  sessionStorage.removeItem(STORAGE_KEY);
}
