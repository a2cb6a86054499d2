// Hash-routed shell: login, role-gated navigation, and the three views.
// Deep links to screens the role may not see redirect to the board.

import { ApiClient } from "./api.js";
import { browserSaveFile, type AppContext } from "./context.js";
import { clear, el } from "./dom.js";
import {
  clearSession,
  loadSession,
  saveSession,
  sessionFrom,
  visibleNav,
  type ViewSession,
} from "./session.js";
import { renderAdminConsole } from "./views/admin.js";
import { renderTriageBoard } from "./views/board.js";
import { renderLogin } from "./views/login.js";
import { renderReportsView } from "./views/reports.js";

export interface AppOptions {
  api?: ApiClient;
  saveFile?: (name: string, bytes: Uint8Array) => void;
}

export function startApp(root: HTMLElement, options: AppOptions = {}): void {
  const api = options.api ?? new ApiClient("");
  const saveFile = options.saveFile ?? browserSaveFile;

  const render = () => {
    const session = loadSession();
    if (!session) {
      renderShell(root, null, () => {});
      const main = root.querySelector("main") as HTMLElement;
      renderLogin(main, api, (info) => {
        saveSession(sessionFrom(info));
        window.location.hash = "#/board";
        render();
      });
      return;
    }
    api.setToken(session.token);
    const ctx: AppContext = {
      api,
      session,
      navigate: (route) => {
        window.location.hash = route;
      },
      saveFile,
    };
    const logout = () => {
      void api.logout().catch(() => undefined);
      clearSession();
      window.location.hash = "#/login";
      render();
    };
    renderShell(root, session, logout);
    const main = root.querySelector("main") as HTMLElement;
    const route = routeFor(session, window.location.hash);
    if (route === "#/admin") {
      void renderAdminConsole(main, ctx);
    } else if (route === "#/reports") {
      void renderReportsView(main, ctx);
    } else {
      void renderTriageBoard(main, ctx);
    }
  };

  window.addEventListener("hashchange", render);
  render();
}

// Role gating for deep links: a route not in the session's visible nav
// falls back to the board.
export function routeFor(session: ViewSession, hash: string): string {
  const allowed = new Set(visibleNav(session).map((item) => item.route));
  return allowed.has(hash) ? hash : "#/board";
}

function renderShell(root: HTMLElement, session: ViewSession | null,
                     onLogout: () => void): void {
  clear(root);
  const nav = el("nav", { class: "topnav" },
    el("span", { class: "brand" }, "btrs"));
  if (session) {
    for (const item of visibleNav(session)) {
      const link = el("a", { href: item.route, class: "nav-link" }, item.label);
      nav.append(link);
    }
    const logout = el("button", { class: "logout" },
                      `log out (${session.username})`);
    logout.addEventListener("click", onLogout);
    nav.append(logout);
  }
  root.append(nav, el("main", {}));
}

declare global {
  interface Window {
    btrsStart?: typeof startApp;
  }
}

if (typeof window !== "undefined") {
  window.btrsStart = startApp;
  const mount = document.getElementById("app");
  if (mount) startApp(mount);
}
