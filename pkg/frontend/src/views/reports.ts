// Reports: matrix / workload / project summary with CSV download wired
// straight to the server's ?format=csv bytes.

import type { Report } from "../api.js";
import { ApiError } from "../api.js";
import type { AppContext } from "../context.js";
import { banner, clear, el } from "../dom.js";

type Kind = "matrix" | "workload" | "project";

export function renderReportsView(root: HTMLElement, ctx: AppContext): Promise<void> {
  return drawReports(root, ctx, "matrix", null);
}

async function drawReports(root: HTMLElement, ctx: AppContext, kind: Kind,
                           filter: number | null): Promise<void> {
  clear(root);
  const messages = el("div", { class: "messages" });
  const isDeveloper = ctx.session.role === "DEVELOPER";

  const tabs = el("div", { class: "tabs" });
  for (const k of ["matrix", "workload", "project"] as Kind[]) {
    const button = el("button", {
      class: k === kind ? "tab active" : "tab",
      "data-kind": k,
    }, k);
    button.addEventListener("click", () => void drawReports(root, ctx, k, null));
    tabs.append(button);
  }

  const controls = el("div", { class: "report-controls" });
  let currentFilter = filter;
  if (kind === "matrix" || kind === "project") {
    const label = kind === "matrix" ? "project filter (optional)" : "project id";
    const input = el("input", { type: "number", class: "report-filter", placeholder: label });
    if (filter !== null) (input as HTMLInputElement).value = String(filter);
    const apply = el("button", { class: "apply-filter" }, "load");
    apply.addEventListener("click", () => {
      const value = (input as HTMLInputElement).value;
      void drawReports(root, ctx, kind, value === "" ? null : Number(value));
    });
    controls.append(input, apply);
  } else if (!isDeveloper) {
    const input = el("input", { type: "number", class: "report-filter",
                                placeholder: "user filter (optional)" });
    if (filter !== null) (input as HTMLInputElement).value = String(filter);
    const apply = el("button", { class: "apply-filter" }, "load");
    apply.addEventListener("click", () => {
      const value = (input as HTMLInputElement).value;
      void drawReports(root, ctx, kind, value === "" ? null : Number(value));
    });
    controls.append(input, apply);
  } else {
    // developers get exactly their own workload; no user selector exists
    currentFilter = null;
    controls.append(el("span", { class: "scope-note" },
                       `workload for ${ctx.session.username}`));
  }

  root.append(el("h2", {}, "Reports"), tabs, controls, messages);

  let report: Report;
  try {
    if (kind === "matrix") {
      report = await ctx.api.reportMatrix(currentFilter ?? undefined);
    } else if (kind === "workload") {
      report = await ctx.api.reportWorkload(currentFilter ?? undefined);
    } else {
      if (currentFilter === null) {
        root.append(el("p", { class: "empty" }, "enter a project id"));
        return;
      }
      report = await ctx.api.reportProject(currentFilter);
    }
  } catch (err) {
    messages.append(banner("error", describe(err)));
    return;
  }

  const table = el("table", { class: "report" },
    el("thead", {}, el("tr", {}, ...report.columns.map((c) => el("th", {}, c)))));
  const tbody = el("tbody", {});
  for (const row of report.rows) {
    tbody.append(el("tr", {}, ...row.map((cell) =>
      el("td", {}, cell === null ? "" : String(cell)))));
  }
  table.append(tbody);
  root.append(table);

  if (kind === "matrix") {
    // display check: the grand total must equal the sum of the body cells
    const body = report.rows.filter((row) => row[0] !== "total");
    const cellSum = body.reduce((acc, row) =>
      acc + row.slice(1, -1).reduce((a: number, c) => a + Number(c), 0), 0);
    const grand = Number(report.rows[report.rows.length - 1]?.slice(-1)[0] ?? 0);
    root.append(el("p", { class: "grand-total", "data-cell-sum": String(cellSum) },
                   `total bugs in scope: ${grand}`));
  }

  const download = el("button", { class: "download-csv" }, "download CSV");
  download.addEventListener("click", async () => {
    try {
      let bytes: Uint8Array;
      if (kind === "project") {
        bytes = await ctx.api.reportCsv("project", currentFilter ?? 0);
      } else {
        bytes = await ctx.api.reportCsv(kind, currentFilter ?? undefined);
      }
      ctx.saveFile(`${report.kind.toLowerCase()}.csv`, bytes);
    } catch (err) {
      clear(messages);
      messages.append(banner("error", describe(err)));
    }
  });
  root.append(download);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.envelope.code}: ${err.envelope.message}`;
  return String(err);
}
