import type { ApiClient } from "./api.js";
import type { ViewSession } from "./session.js";

// Everything a view needs. saveFile is injectable so tests can capture
// download bytes instead of touching the real browser download path.
export interface AppContext {
  api: ApiClient;
  session: ViewSession;
  navigate: (route: string) => void;
  saveFile: (name: string, bytes: Uint8Array) => void;
}

export function browserSaveFile(name: string, bytes: Uint8Array): void {
  const blob = new Blob([bytes as BlobPart], { type: "text/csv" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  URL.revokeObjectURL(url);
}
