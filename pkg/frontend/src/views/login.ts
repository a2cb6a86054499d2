import { ApiError, type SessionInfo } from "../api.js";
import type { ApiClient } from "../api.js";
import { clear, el } from "../dom.js";

export function renderLogin(root: HTMLElement, api: ApiClient,
                            onLogin: (info: SessionInfo) => void): void {
  clear(root);
  const message = el("p", { class: "form-error" });
  const username = el("input", { name: "username", autocomplete: "username" });
  const password = el("input", { name: "password", type: "password" });
  const form = el("form", { class: "login-form" },
    el("h2", {}, "Sign in"),
    el("label", {}, "username", username),
    el("label", {}, "password", password),
    el("button", { type: "submit" }, "log in"),
    message);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    message.textContent = "";
    try {
      const info = await api.login((username as HTMLInputElement).value,
                                   (password as HTMLInputElement).value);
      onLogin(info);
    } catch (err) {
      message.textContent = err instanceof ApiError
        ? `${err.envelope.code}: ${err.envelope.message}`
        : String(err);
    }
  });
  root.append(form);
}
