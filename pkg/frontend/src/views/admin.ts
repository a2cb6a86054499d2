// Admin console: add/update screens for every master table. Each
// mutation round-trips through the API and the whole console re-renders
// from fresh server state; there is no client-side source of truth.
// Envelope errors land inline next to the offending field.

import type { StatusGraph } from "../api.js";
import { ApiError } from "../api.js";
import type { AppContext } from "../context.js";
import { banner, clear, el } from "../dom.js";

export async function renderAdminConsole(root: HTMLElement,
                                         ctx: AppContext): Promise<void> {
  clear(root);
  if (ctx.session.role !== "ADMIN") {
    ctx.navigate("#/board");
    return;
  }

  const refresh = () => renderAdminConsole(root, ctx);
  let graph: StatusGraph;
  let users, severities, types, projects;
  try {
    [users, severities, graph, types, projects] = await Promise.all([
      ctx.api.listUsers(),
      ctx.api.listSeverities(),
      ctx.api.statusGraph(),
      ctx.api.listBugTypes(),
      ctx.api.listProjects(),
    ]);
  } catch (err) {
    root.append(banner("error", err instanceof ApiError ? err.message : String(err)));
    return;
  }

  root.append(el("h2", {}, "Admin console"));

  // -- users ----------------------------------------------------------------
  const userRows = users.users.map((u) =>
    el("tr", {}, el("td", {}, String(u.user_id)), el("td", {}, u.username),
       el("td", {}, u.role)));
  root.append(section("Users", "users",
    el("table", { class: "listing" },
      el("thead", {}, el("tr", {}, el("th", {}, "id"), el("th", {}, "username"),
                         el("th", {}, "role"))),
      el("tbody", {}, ...userRows)),
    form("user-add", [
      field("username", el("input", { name: "username" })),
      field("password", el("input", { name: "password", type: "password" })),
      field("role", el("select", { name: "role" },
        el("option", { value: "DEVELOPER" }, "DEVELOPER"),
        el("option", { value: "MANAGER" }, "MANAGER"),
        el("option", { value: "ADMIN" }, "ADMIN"))),
    ], "add user", async (values) => {
      await ctx.api.createUser(values.username, values.password,
                               values.role as "ADMIN" | "MANAGER" | "DEVELOPER");
      await refresh();
    })));

  // -- severities -------------------------------------------------------------
  const severityRows = severities.levels.map((s) =>
    el("tr", {}, el("td", {}, String(s.sev_id)), el("td", {}, s.name),
       el("td", {}, String(s.rank)), el("td", {}, s.description)));
  root.append(section("Severity levels", "severities",
    el("table", { class: "listing" },
      el("thead", {}, el("tr", {}, el("th", {}, "id"), el("th", {}, "name"),
                         el("th", {}, "rank"), el("th", {}, "description"))),
      el("tbody", {}, ...severityRows)),
    form("severity-upsert", [
      field("sev_id", el("input", { name: "sev_id", type: "number" })),
      field("name", el("input", { name: "name" })),
      field("rank", el("input", { name: "rank", type: "number" })),
      field("description", el("input", { name: "description" })),
    ], "save severity", async (values) => {
      await ctx.api.putSeverity(Number(values.sev_id), values.name,
                                Number(values.rank), values.description);
      await refresh();
    })));

  // -- statuses + graph editor -------------------------------------------------
  const statusName = new Map(graph.levels.map((lv) => [lv.status_id, lv.name]));
  const statusRows = graph.levels.map((s) =>
    el("tr", {},
       el("td", {}, String(s.status_id)), el("td", {}, s.name),
       el("td", {}, String(s.rank)),
       el("td", {}, s.initial ? "initial" : ""),
       el("td", {}, s.terminal ? "terminal" : "")));
  const edgeList = graph.edges
    .map(([f, t]) => `${statusName.get(f) ?? f} -> ${statusName.get(t) ?? t}`)
    .sort();
  const edgesText = graph.edges.map(([f, t]) => `${f}>${t}`).join(",");
  root.append(section("Status levels and transition graph", "statuses",
    el("table", { class: "listing" },
      el("thead", {}, el("tr", {}, el("th", {}, "id"), el("th", {}, "name"),
                         el("th", {}, "rank"), el("th", {}, "initial"),
                         el("th", {}, "terminal"))),
      el("tbody", {}, ...statusRows)),
    el("ul", { class: "edge-list" }, ...edgeList.map((e) => el("li", {}, e))),
    form("status-upsert", [
      field("status_id", el("input", { name: "status_id", type: "number" })),
      field("name", el("input", { name: "name" })),
      field("rank", el("input", { name: "rank", type: "number" })),
      field("initial", el("input", { name: "initial", type: "checkbox" })),
      field("terminal", el("input", { name: "terminal", type: "checkbox" })),
      field("edges", el("input", { name: "edges", value: edgesText,
                                   class: "edges-input" })),
    ], "save status + graph", async (values, form) => {
      const edges = values.edges.split(",").filter((c) => c.trim() !== "")
        .map((chunk) => {
          const [from, to] = chunk.split(">").map((x) => Number(x.trim()));
          return [from, to] as [number, number];
        });
      const initial = (form.querySelector("[name=initial]") as HTMLInputElement).checked;
      const terminal = (form.querySelector("[name=terminal]") as HTMLInputElement).checked;
      await ctx.api.putStatus(Number(values.status_id), {
        name: values.name, rank: Number(values.rank), initial, terminal,
      }, edges);
      await refresh();
    })));

  // -- bug types ----------------------------------------------------------------
  const typeRows = types.types.map((t) =>
    el("tr", {}, el("td", {}, String(t.type_id)), el("td", {}, t.type_name),
       el("td", {}, t.type_desc)));
  root.append(section("Bug types", "bug-types",
    el("table", { class: "listing" },
      el("thead", {}, el("tr", {}, el("th", {}, "id"), el("th", {}, "name"),
                         el("th", {}, "description"))),
      el("tbody", {}, ...typeRows)),
    form("type-add", [
      field("name", el("input", { name: "name" })),
      field("desc", el("input", { name: "desc" })),
    ], "add bug type", async (values) => {
      await ctx.api.createBugType(values.name, values.desc);
      await refresh();
    })));

  // -- projects and modules --------------------------------------------------------
  const projectRows = projects.projects.map((p) =>
    el("tr", {}, el("td", {}, String(p.project_id)), el("td", {}, p.project_name),
       el("td", {}, p.status_text), el("td", {}, `#${p.manager_id}`)));
  root.append(section("Projects and modules", "projects",
    el("table", { class: "listing" },
      el("thead", {}, el("tr", {}, el("th", {}, "id"), el("th", {}, "name"),
                         el("th", {}, "status"), el("th", {}, "manager"))),
      el("tbody", {}, ...projectRows)),
    form("project-add", [
      field("name", el("input", { name: "name" })),
      field("description", el("input", { name: "description" })),
      field("manager_id", el("input", { name: "manager_id", type: "number" })),
    ], "add project", async (values) => {
      await ctx.api.createProject(values.name, values.description,
                                  Number(values.manager_id));
      await refresh();
    }),
    form("module-add", [
      field("project_id", el("input", { name: "project_id", type: "number" })),
      field("name", el("input", { name: "name" })),
      field("assignee_id", el("input", { name: "assignee_id", type: "number" })),
    ], "add module", async (values) => {
      const assignee = values.assignee_id === "" ? null : Number(values.assignee_id);
      await ctx.api.addModule(Number(values.project_id), values.name, assignee);
      await refresh();
    }),
    form("project-status", [
      field("project_id", el("input", { name: "project_id", type: "number" })),
      field("status", statusSelect()),
    ], "set project status", async (values) => {
      await ctx.api.setProjectStatus(Number(values.project_id), values.status);
      await refresh();
    })));

  // -- assignments -------------------------------------------------------------------
  root.append(section("Assignments", "assignments",
    form("assignment-upsert", [
      field("user_id", el("input", { name: "user_id", type: "number" })),
      field("project_id", el("input", { name: "project_id", type: "number" })),
      field("status", statusSelect()),
    ], "assign project", async (values) => {
      await ctx.api.putAssignment(Number(values.user_id),
                                  Number(values.project_id), values.status);
      await refresh();
    })));
}

function statusSelect(): HTMLSelectElement {
  return el("select", { name: "status" },
    ...["PLANNED", "ACTIVE", "ON_HOLD", "COMPLETED"].map((s) =>
      el("option", { value: s }, s)));
}

function section(title: string, id: string, ...children: HTMLElement[]): HTMLElement {
  return el("section", { class: "admin-section", id: `admin-${id}` },
    el("h3", {}, title), ...children);
}

function field(name: string, input: HTMLElement): HTMLElement {
  return el("label", { class: "field", "data-field": name },
    name, input, el("span", { class: "field-error", "data-error-for": name }));
}

type Submit = (values: Record<string, string>, form: HTMLFormElement) => Promise<void>;

function form(name: string, fields: HTMLElement[], submitLabel: string,
              onSubmit: Submit): HTMLFormElement {
  const message = el("span", { class: "form-error" });
  const node = el("form", { class: "admin-form", "data-form": name },
    ...fields,
    el("button", { type: "submit" }, submitLabel),
    message);
  node.addEventListener("submit", async (event) => {
    event.preventDefault();
    clearErrors(node, message);
    const values: Record<string, string> = {};
    for (const input of Array.from(node.querySelectorAll("input, select"))) {
      const item = input as HTMLInputElement | HTMLSelectElement;
      values[item.name] = item.value;
    }
    try {
      await onSubmit(values, node);
    } catch (err) {
      renderFormError(node, message, err);
    }
  });
  return node;
}

function clearErrors(form: HTMLFormElement, message: HTMLElement): void {
  message.textContent = "";
  for (const span of Array.from(form.querySelectorAll(".field-error"))) {
    span.textContent = "";
  }
}

// Inline envelope rendering: field errors attach to their field, the
// code + message stay on the form so the admin sees why a 409 happened
// while the form contents are preserved.
function renderFormError(form: HTMLFormElement, message: HTMLElement,
                         err: unknown): void {
  if (!(err instanceof ApiError)) {
    message.textContent = String(err);
    return;
  }
  message.textContent = `${err.envelope.code}: ${err.envelope.message}`;
  for (const detail of err.envelope.details ?? []) {
    const slot = form.querySelector(`[data-error-for="${detail.field}"]`);
    if (slot) slot.textContent = detail.rule;
  }
}
