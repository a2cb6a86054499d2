// Typed client for the tracker's HTTP API. Every non-2xx response carries
// one error envelope; we surface it as ApiError so views can render the
// code/message inline.

export type Role = "ADMIN" | "MANAGER" | "DEVELOPER";

export interface ErrorEnvelope {
  code: string;
  message: string;
  details?: { field: string; rule: string }[];
}

export class ApiError extends Error {
  constructor(public status: number, public envelope: ErrorEnvelope) {
    super(`${envelope.code}: ${envelope.message}`);
  }
}

export interface SessionInfo {
  token: string;
  user_id: number;
  username: string;
  role: Role;
  expires_at: string;
}

export interface User {
  user_id: number;
  username: string;
  role: Role;
  active: boolean;
}

export interface SeverityLevel {
  sev_id: number;
  name: string;
  rank: number;
  description: string;
}

export interface StatusLevel {
  status_id: number;
  name: string;
  rank: number;
  initial: boolean;
  terminal: boolean;
}

export interface StatusGraph {
  levels: StatusLevel[];
  edges: [number, number][];
}

export interface BugType {
  type_id: number;
  type_name: string;
  type_desc: string;
}

export interface Project {
  project_id: number;
  project_name: string;
  description: string;
  status_text: string;
  manager_id: number;
}

export interface ProjectModule {
  module_id: number;
  project_id: number;
  name: string;
  assignee_id: number | null;
}

export interface Assignment {
  user_id: number;
  project_id: number;
  status_text: string;
}

export interface Transition {
  bug_id: number;
  from_status_id: number | null;
  to_status_id: number;
  actor_id: number;
  at: string;
  comment: string;
}

export interface Bug {
  bug_id: number;
  bug_name: string;
  project_id: number;
  module_id: number | null;
  type_id: number;
  severity_id: number;
  status_id: number;
  reporter_id: number;
  assignee_id: number | null;
  description: string;
  created_at: string;
  history: Transition[];
}

export interface Report {
  kind: string;
  generated_at: string;
  filters: Record<string, number | null>;
  columns: string[];
  rows: (string | number)[][];
}

export interface Estimate {
  kloc: number;
  mode: string;
  effort_pm: number;
  phases: { phase: string; person_months: number }[];
}

export interface BugListParams {
  project?: number;
  assignee?: number;
  open?: boolean;
  sort?: "triage" | "id";
}

export class ApiClient {
  constructor(private baseUrl: string = "", private token: string | null = null) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const envelope = (await response.json()) as ErrorEnvelope;
      throw new ApiError(response.status, envelope);
    }
    return (await response.json()) as T;
  }

  async requestBytes(path: string): Promise<Uint8Array> {
    const response = await fetch(this.baseUrl + path, { headers: this.headers() });
    if (!response.ok) {
      const envelope = (await response.json()) as ErrorEnvelope;
      throw new ApiError(response.status, envelope);
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  async login(username: string, password: string): Promise<SessionInfo> {
    const info = await this.request<SessionInfo>("POST", "/session", {
      username,
      password,
    });
    this.token = info.token;
    return info;
  }

  async logout(): Promise<void> {
    await this.request("DELETE", "/session");
    this.token = null;
  }

  listUsers(): Promise<{ users: User[] }> {
    return this.request("GET", "/users");
  }

  createUser(username: string, password: string, role: Role): Promise<User> {
    return this.request("POST", "/users", { username, password, role });
  }

  listSeverities(): Promise<{ levels: SeverityLevel[] }> {
    return this.request("GET", "/severities");
  }

  putSeverity(sevId: number, name: string, rank: number,
              description: string): Promise<{ level: SeverityLevel }> {
    return this.request("PUT", `/severities/${sevId}`, { name, rank, description });
  }

  statusGraph(): Promise<StatusGraph> {
    return this.request("GET", "/statuses/graph");
  }

  putStatus(statusId: number, level: Omit<StatusLevel, "status_id">,
            edges: [number, number][]): Promise<{ level: StatusLevel; graph: StatusGraph }> {
    return this.request("PUT", `/statuses/${statusId}`, {
      level,
      graph: { edges },
    });
  }

  listBugTypes(): Promise<{ types: BugType[] }> {
    return this.request("GET", "/bug-types");
  }

  createBugType(name: string, desc: string): Promise<BugType> {
    return this.request("POST", "/bug-types", { name, desc });
  }

  listProjects(): Promise<{ projects: Project[] }> {
    return this.request("GET", "/projects");
  }

  createProject(name: string, description: string, managerId: number): Promise<Project> {
    return this.request("POST", "/projects", {
      name,
      description,
      manager_id: managerId,
    });
  }

  addModule(projectId: number, name: string,
            assigneeId: number | null): Promise<ProjectModule> {
    return this.request("POST", `/projects/${projectId}/modules`, {
      name,
      assignee_id: assigneeId,
    });
  }

  setProjectStatus(projectId: number, status: string): Promise<Project> {
    return this.request("PUT", `/projects/${projectId}/status`, { status });
  }

  putAssignment(userId: number, projectId: number, status: string): Promise<Assignment> {
    return this.request("PUT", "/assignments", {
      user_id: userId,
      project_id: projectId,
      status,
    });
  }

  listBugs(params: BugListParams = {}): Promise<{ bugs: Bug[] }> {
    const query = new URLSearchParams();
    if (params.project !== undefined) query.set("project", String(params.project));
    if (params.assignee !== undefined) query.set("assignee", String(params.assignee));
    if (params.open) query.set("open", "true");
    query.set("sort", params.sort ?? "triage");
    return this.request("GET", `/bugs?${query.toString()}`);
  }

  reportBug(draft: { bug_name: string; project_id: number; type_id: number;
                     severity_id: number; module_id?: number | null;
                     description?: string }): Promise<Bug> {
    return this.request("POST", "/bugs", draft);
  }

  assignBug(bugId: number, assigneeId: number): Promise<Bug> {
    return this.request("POST", `/bugs/${bugId}/assign`, { assignee_id: assigneeId });
  }

  transitionBug(bugId: number, toStatusId: number,
                comment = ""): Promise<{ transition: Transition; bug: Bug }> {
    return this.request("POST", `/bugs/${bugId}/transition`, {
      to_status_id: toStatusId,
      comment,
    });
  }

  reportMatrix(projectId?: number): Promise<Report> {
    const suffix = projectId === undefined ? "" : `?project=${projectId}`;
    return this.request("GET", `/reports/matrix${suffix}`);
  }

  reportWorkload(userId?: number): Promise<Report> {
    const suffix = userId === undefined ? "" : `?user=${userId}`;
    return this.request("GET", `/reports/workload${suffix}`);
  }

  reportProject(projectId: number): Promise<Report> {
    return this.request("GET", `/reports/project/${projectId}`);
  }

  reportCsv(kind: "matrix" | "workload", filter?: number): Promise<Uint8Array>;
  reportCsv(kind: "project", filter: number): Promise<Uint8Array>;
  reportCsv(kind: "matrix" | "workload" | "project", filter?: number): Promise<Uint8Array> {
    if (kind === "project") {
      return this.requestBytes(`/reports/project/${filter}?format=csv`);
    }
    const param = kind === "matrix" ? "project" : "user";
    const suffix = filter === undefined ? "" : `&${param}=${filter}`;
    return this.requestBytes(`/reports/${kind}?format=csv${suffix}`);
  }

  estimate(kloc: number, mode: string): Promise<Estimate> {
    return this.request("GET", `/estimate?kloc=${kloc}&mode=${encodeURIComponent(mode)}`);
  }
}
