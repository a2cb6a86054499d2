// Reports view: CSV download passes the server bytes through untouched,
// the displayed grand total reconciles with the cell sum, and developers
// get a self-scoped workload.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { AppContext } from "../src/context.js";
import { renderReportsView } from "../src/views/reports.js";
import {
  MATRIX_CSV_BYTES,
  MATRIX_REPORT,
  flush,
  json,
  session,
  stubFetch,
} from "./fixtures.js";

function reportRoutes() {
  return {
    "GET /reports/matrix": (url: URL) =>
      url.searchParams.get("format") === "csv"
        ? { body: MATRIX_CSV_BYTES, contentType: "text/csv" }
        : json(MATRIX_REPORT),
    "GET /reports/workload": json({
      kind: "USER_WORKLOAD",
      generated_at: "t",
      filters: { user_id: 3 },
      columns: ["username", "project", "assignment_status", "open_bugs",
                "resolved_bugs"],
      rows: [["developer", "Billing", "ACTIVE", 1, 0]],
    }),
  };
}

function makeContext(role: "ADMIN" | "MANAGER" | "DEVELOPER",
                     captured: Uint8Array[]): AppContext {
  const api = new ApiClient("");
  api.setToken("test-token");
  return {
    api,
    session: session(role, 3),
    navigate: () => {},
    saveFile: (_name, bytes) => captured.push(bytes),
  };
}

describe("reports view", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<div id='root'></div>";
    root = document.getElementById("root") as HTMLElement;
  });

  it("renders the matrix table in server order", async () => {
    stubFetch(reportRoutes());
    await renderReportsView(root, makeContext("MANAGER", []));
    const headers = Array.from(root.querySelectorAll("table.report th"))
      .map((th) => th.textContent);
    expect(headers).toEqual(MATRIX_REPORT.columns);
    const firstRow = Array.from(
      root.querySelectorAll("table.report tbody tr")[0]!.querySelectorAll("td"))
      .map((td) => td.textContent);
    expect(firstRow).toEqual(MATRIX_REPORT.rows[0]!.map(String));
  });

  it("displayed grand total equals the matrix cell sum", async () => {
    stubFetch(reportRoutes());
    await renderReportsView(root, makeContext("MANAGER", []));
    const note = root.querySelector(".grand-total") as HTMLElement;
    expect(note.textContent).toContain("4");
    expect(note.getAttribute("data-cell-sum")).toBe("4");
  });

  it("CSV download bytes equal the server's ?format=csv body", async () => {
    stubFetch(reportRoutes());
    const captured: Uint8Array[] = [];
    await renderReportsView(root, makeContext("MANAGER", captured));
    (root.querySelector(".download-csv") as HTMLButtonElement).click();
    await flush();
    await flush();
    expect(captured).toHaveLength(1);
    expect(Array.from(captured[0]!)).toEqual(Array.from(MATRIX_CSV_BYTES));
  });

  it("requests csv with format=csv and the active filter", async () => {
    const calls = stubFetch(reportRoutes());
    const captured: Uint8Array[] = [];
    await renderReportsView(root, makeContext("MANAGER", captured));
    (root.querySelector(".download-csv") as HTMLButtonElement).click();
    await flush();
    const csvCall = calls.find((c) =>
      c.url.pathname === "/reports/matrix" &&
      c.url.searchParams.get("format") === "csv");
    expect(csvCall).toBeDefined();
  });

  it("developers get a self-scoped workload with no user selector", async () => {
    const calls = stubFetch(reportRoutes());
    await renderReportsView(root, makeContext("DEVELOPER", []));
    (root.querySelector("[data-kind='workload']") as HTMLButtonElement).click();
    await flush();
    await flush();
    expect(root.querySelector(".report-filter")).toBeNull();
    expect(root.querySelector(".scope-note")?.textContent).toContain("developer");
    const workloadCall = calls.find((c) => c.url.pathname === "/reports/workload");
    expect(workloadCall?.url.searchParams.get("user")).toBeNull();
  });

  it("an API error renders as a banner with the envelope code", async () => {
    stubFetch({
      "GET /reports/matrix": {
        status: 403,
        body: JSON.stringify({ code: "PERMISSION_DENIED",
                               message: "role DEVELOPER may not view_reports" }),
      },
    });
    await renderReportsView(root, makeContext("MANAGER", []));
    expect(root.querySelector(".banner-error")?.textContent)
      .toContain("PERMISSION_DENIED");
  });
});
