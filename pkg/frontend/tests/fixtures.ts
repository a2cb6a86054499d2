// Canned API responses for a seeded store, shared by the view tests.

import type { Bug, Report, SeverityLevel, StatusGraph } from "../src/api.js";
import type { ViewSession } from "../src/session.js";

export const GRAPH: StatusGraph = {
  levels: [
    { status_id: 1, name: "NEW", rank: 1, initial: true, terminal: false },
    { status_id: 2, name: "ASSIGNED", rank: 2, initial: false, terminal: false },
    { status_id: 3, name: "IN_PROGRESS", rank: 3, initial: false, terminal: false },
    { status_id: 4, name: "RESOLVED", rank: 4, initial: false, terminal: false },
    { status_id: 5, name: "VERIFIED", rank: 5, initial: false, terminal: false },
    { status_id: 6, name: "CLOSED", rank: 6, initial: false, terminal: true },
    { status_id: 7, name: "REOPENED", rank: 7, initial: false, terminal: false },
  ],
  edges: [
    [1, 2], [1, 6], [2, 3], [2, 1], [3, 4], [3, 2], [4, 5], [4, 7],
    [5, 6], [6, 7], [7, 2],
  ],
};

export const SEVERITIES: SeverityLevel[] = [
  { sev_id: 1, name: "Blocker", rank: 1, description: "" },
  { sev_id: 2, name: "Critical", rank: 2, description: "" },
  { sev_id: 3, name: "Major", rank: 3, description: "" },
  { sev_id: 4, name: "Minor", rank: 4, description: "" },
  { sev_id: 5, name: "Trivial", rank: 5, description: "" },
];

export const PROJECTS = [
  { project_id: 1, project_name: "Billing", description: "", status_text: "ACTIVE",
    manager_id: 2 },
];

function bug(bugId: number, severityId: number, statusId: number,
             assigneeId: number | null): Bug {
  return {
    bug_id: bugId,
    bug_name: `bug ${bugId}`,
    project_id: 1,
    module_id: null,
    type_id: 1,
    severity_id: severityId,
    status_id: statusId,
    reporter_id: 3,
    assignee_id: assigneeId,
    description: "",
    created_at: "2026-01-01T00:00:00+00:00",
    history: [{ bug_id: bugId, from_status_id: null, to_status_id: 1,
                actor_id: 3, at: "2026-01-01T00:00:00+00:00", comment: "" }],
  };
}

// Triage order (severity rank, status rank, id) deliberately differs from
// id order so a client-side re-sort would be caught: ids come back 3, 2, 4, 1.
export const TRIAGE_BUGS: Bug[] = [
  bug(3, 1, 2, 3),     // Blocker / ASSIGNED / dev 3
  bug(2, 1, 4, 4),     // Blocker / RESOLVED / dev 4
  bug(4, 2, 6, null),  // Critical / CLOSED
  bug(1, 2, 1, null),  // Critical / NEW  (id tiebreak after CLOSED by rank)
];

export const MATRIX_REPORT: Report = {
  kind: "SEVERITY_STATUS_MATRIX",
  generated_at: "2026-01-01T00:00:10+00:00",
  filters: { project_id: null, assignee_id: null },
  columns: ["severity", "NEW", "ASSIGNED", "IN_PROGRESS", "RESOLVED", "VERIFIED",
            "CLOSED", "REOPENED", "total"],
  rows: [
    ["Blocker", 0, 1, 0, 1, 0, 0, 0, 2],
    ["Critical", 1, 0, 0, 0, 0, 1, 0, 2],
    ["Major", 0, 0, 0, 0, 0, 0, 0, 0],
    ["Minor", 0, 0, 0, 0, 0, 0, 0, 0],
    ["Trivial", 0, 0, 0, 0, 0, 0, 0, 0],
    ["total", 1, 1, 0, 1, 0, 1, 0, 4],
  ],
};

export const MATRIX_CSV_BYTES = new TextEncoder().encode(
  "severity,NEW,ASSIGNED,IN_PROGRESS,RESOLVED,VERIFIED,CLOSED,REOPENED,total\r\n" +
  "Blocker,0,1,0,1,0,0,0,2\r\n" +
  "Critical,1,0,0,0,0,1,0,2\r\n" +
  "Major,0,0,0,0,0,0,0,0\r\n" +
  "Minor,0,0,0,0,0,0,0,0\r\n" +
  "Trivial,0,0,0,0,0,0,0,0\r\n" +
  "total,1,1,0,1,0,1,0,4\r\n");

export function session(role: "ADMIN" | "MANAGER" | "DEVELOPER",
                        userId = 1): ViewSession {
  return { token: "test-token", userId, username: role.toLowerCase(),
           role, projectScope: null };
}

type Route = { body: BodyInit; status?: number; contentType?: string };

// fetch stub keyed on "METHOD pathname" with optional query matching;
// records every call for assertions.
export function stubFetch(routes: Record<string, Route | ((url: URL) => Route)>) {
  const calls: { method: string; url: URL }[] = [];
  const impl = async (input: RequestInfo | URL, init?: RequestInit) => {
    const method = (init?.method ?? "GET").toUpperCase();
    const url = new URL(String(input), "http://test.local");
    calls.push({ method, url });
    const key = `${method} ${url.pathname}`;
    const route = routes[key];
    if (!route) {
      return new Response(JSON.stringify({ code: "NOT_FOUND",
                                           message: `no stub for ${key}` }),
                          { status: 404,
                            headers: { "Content-Type": "application/json" } });
    }
    const resolved = typeof route === "function" ? route(url) : route;
    return new Response(resolved.body, {
      status: resolved.status ?? 200,
      headers: { "Content-Type": resolved.contentType ?? "application/json" },
    });
  };
  globalThis.fetch = impl as typeof fetch;
  return calls;
}

export function json(value: unknown): Route {
  return { body: JSON.stringify(value) };
}

type BodyInit = string | Uint8Array;

export const BOARD_ROUTES = {
  "GET /bugs": json({ bugs: TRIAGE_BUGS }),
  "GET /statuses/graph": json(GRAPH),
  "GET /severities": json({ levels: SEVERITIES }),
  "GET /projects": json({ projects: PROJECTS }),
};

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
