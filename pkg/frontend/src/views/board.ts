// Triage board: rows render in exactly the order the API returned them
// (never re-sorted client-side), and row actions offer only edges that
// are legal from the bug's current status per the fetched graph.

import type { Bug, SeverityLevel, StatusGraph } from "../api.js";
import { ApiError } from "../api.js";
import type { AppContext } from "../context.js";
import { banner, clear, el } from "../dom.js";
import { can } from "../session.js";

interface BoardData {
  bugs: Bug[];
  graph: StatusGraph;
  severities: SeverityLevel[];
  projects: { project_id: number; project_name: string }[];
}

async function fetchBoard(ctx: AppContext, projectId: number | null,
                          openOnly: boolean): Promise<BoardData> {
  const [bugsRes, graph, severitiesRes, projectsRes] = await Promise.all([
    ctx.api.listBugs({
      project: projectId ?? undefined,
      open: openOnly,
      sort: "triage",
    }),
    ctx.api.statusGraph(),
    ctx.api.listSeverities(),
    ctx.api.listProjects(),
  ]);
  return {
    bugs: bugsRes.bugs,
    graph,
    severities: severitiesRes.levels,
    projects: projectsRes.projects,
  };
}

function legalTargets(graph: StatusGraph, statusId: number) {
  const byId = new Map(graph.levels.map((lv) => [lv.status_id, lv]));
  return graph.edges
    .filter(([from]) => from === statusId)
    .map(([, to]) => byId.get(to))
    .filter((lv): lv is NonNullable<typeof lv> => lv !== undefined)
    .sort((a, b) => a.rank - b.rank);
}

export function renderTriageBoard(root: HTMLElement, ctx: AppContext): Promise<void> {
  return drawBoard(root, ctx, ctx.session.projectScope, false);
}

async function drawBoard(root: HTMLElement, ctx: AppContext,
                         projectId: number | null, openOnly: boolean): Promise<void> {
  clear(root);
  let data: BoardData;
  try {
    data = await fetchBoard(ctx, projectId, openOnly);
  } catch (err) {
    root.append(banner("error", describe(err)));
    return;
  }

  const statusName = new Map(data.graph.levels.map((lv) => [lv.status_id, lv.name]));
  const severityName = new Map(data.severities.map((s) => [s.sev_id, s.name]));
  const projectName = new Map(data.projects.map((p) => [p.project_id, p.project_name]));

  const refresh = () => drawBoard(root, ctx, projectId, openOnly);
  const messages = el("div", { class: "messages" });

  const projectSelect = el("select", { class: "project-filter" },
    el("option", { value: "" }, "all projects"),
    ...data.projects.map((p) =>
      el("option", {
        value: String(p.project_id),
        ...(projectId === p.project_id ? { selected: true } : {}),
      }, p.project_name)));
  projectSelect.addEventListener("change", () => {
    const value = (projectSelect as HTMLSelectElement).value;
    const scope = value === "" ? null : Number(value);
    ctx.session.projectScope = scope;
    void drawBoard(root, ctx, scope, openOnly);
  });

  const openToggle = el("input", { type: "checkbox", class: "open-only" });
  (openToggle as HTMLInputElement).checked = openOnly;
  openToggle.addEventListener("change", () =>
    void drawBoard(root, ctx, projectId, (openToggle as HTMLInputElement).checked));

  const table = el("table", { class: "board" },
    el("thead", {}, el("tr", {},
      el("th", {}, "id"), el("th", {}, "bug"), el("th", {}, "severity"),
      el("th", {}, "status"), el("th", {}, "project"), el("th", {}, "assignee"),
      el("th", {}, "actions"))));
  const tbody = el("tbody", {});
  table.append(tbody);

  for (const bug of data.bugs) {
    const row = el("tr", { class: "bug-row", "data-bug-id": String(bug.bug_id) });
    row.append(
      el("td", {}, String(bug.bug_id)),
      el("td", {}, bug.bug_name),
      el("td", {}, severityName.get(bug.severity_id) ?? String(bug.severity_id)),
      el("td", { class: "status-cell" },
         statusName.get(bug.status_id) ?? String(bug.status_id)),
      el("td", {}, projectName.get(bug.project_id) ?? String(bug.project_id)),
      el("td", {}, bug.assignee_id === null ? "" : `#${bug.assignee_id}`),
    );

    const actions = el("td", { class: "actions" });
    const mayTransition = can(ctx.session, "transition_bug") &&
      (ctx.session.role !== "DEVELOPER" || bug.assignee_id === ctx.session.userId);
    if (mayTransition) {
      const select = el("select", { class: "transition-select" },
        ...legalTargets(data.graph, bug.status_id).map((lv) =>
          el("option", { value: String(lv.status_id) }, lv.name)));
      const go = el("button", { class: "transition-go" }, "move");
      go.addEventListener("click", async () => {
        const target = Number((select as HTMLSelectElement).value);
        try {
          await ctx.api.transitionBug(bug.bug_id, target);
          await refresh();
        } catch (err) {
          showActionError(messages, err, refresh);
        }
      });
      actions.append(select, go);
    }
    if (can(ctx.session, "assign_bug")) {
      const devInput = el("input", {
        type: "number", class: "assign-input", placeholder: "dev id",
      });
      const assign = el("button", { class: "assign-go" }, "assign");
      assign.addEventListener("click", async () => {
        const devId = Number((devInput as HTMLInputElement).value);
        try {
          await ctx.api.assignBug(bug.bug_id, devId);
          await refresh();
        } catch (err) {
          showActionError(messages, err, refresh);
        }
      });
      actions.append(devInput, assign);
    }
    row.append(actions);
    tbody.append(row);
  }

  root.append(
    el("h2", {}, "Triage board"),
    el("div", { class: "board-controls" },
      el("label", {}, "project: ", projectSelect),
      el("label", {}, "open only ", openToggle)),
    messages,
    data.bugs.length === 0 ? el("p", { class: "empty" }, "no bugs in scope") : table,
  );
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.envelope.code}: ${err.envelope.message}`;
  return String(err);
}

function showActionError(messages: HTMLElement, err: unknown,
                         refresh: () => Promise<void>): void {
  clear(messages);
  if (err instanceof ApiError && err.status === 409) {
    // someone else moved the bug first; offer a reload of server truth
    const reload = el("button", { class: "reload" }, "reload board");
    reload.addEventListener("click", () => void refresh());
    messages.append(
      banner("error", `${describe(err)} — the board is stale.`), reload);
    return;
  }
  messages.append(banner("error", describe(err)));
}
