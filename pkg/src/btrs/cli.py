"""Operator CLI: a thin HTTP client over the service plus `btrs serve`.

Exit codes mirror the HTTP status mapping one-to-one so scripts can branch
on outcomes: 0 success, 2 validation/usage, 3 auth, 4 not found,
5 conflict, 6 server or I/O trouble.
"""

from __future__ import annotations

import csv
import io
import json
import os
import stat
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from .domain import DEFAULT_GRAPH_EDGES, DEFAULT_SEVERITIES, DEFAULT_STATUSES

EXIT_VALIDATION = 2
EXIT_AUTH = 3
EXIT_NOT_FOUND = 4
EXIT_CONFLICT = 5
EXIT_SERVER = 6

DEFAULT_URL = "http://127.0.0.1:8430"


def exit_code_for_status(status: int) -> int:
    if status in (401, 403):
        return EXIT_AUTH
    if status == 404:
        return EXIT_NOT_FOUND
    if status == 409:
        return EXIT_CONFLICT
    if status in (400, 405, 422):
        return EXIT_VALIDATION
    return EXIT_SERVER


class ClientConfig:
    def __init__(self, url: Optional[str], token: Optional[str],
                 config_dir: Optional[str], output_format: str):
        self.url = (url or os.environ.get("BTRS_URL") or DEFAULT_URL).rstrip("/")
        self.config_dir = Path(config_dir or os.environ.get("BTRS_CONFIG_DIR")
                               or Path.home() / ".config" / "btrs")
        self._token = token or os.environ.get("BTRS_TOKEN")
        self.output_format = output_format

    @property
    def token_path(self) -> Path:
        return self.config_dir / "token"

    def token(self) -> Optional[str]:
        if self._token:
            return self._token
        if self.token_path.exists():
            return self.token_path.read_text(encoding="utf-8").strip() or None
        return None

    def save_token(self, token: str) -> None:
        self.config_dir.mkdir(parents=True, exist_ok=True)
        self.token_path.write_text(token + "\n", encoding="utf-8")
        self.token_path.chmod(stat.S_IRUSR | stat.S_IWUSR)


def request(cfg: ClientConfig, method: str, path: str, *, json_body=None,
            params=None, need_token: bool = True) -> httpx.Response:
    headers = {}
    if need_token:
        token = cfg.token()
        if not token:
            click.echo("error TOKEN_MISSING: no token; run `btrs login` or set BTRS_TOKEN",
                       err=True)
            sys.exit(EXIT_AUTH)
        headers["Authorization"] = f"Bearer {token}"
    try:
        response = httpx.request(method, cfg.url + path, json=json_body,
                                 params=params, headers=headers, timeout=30.0)
    except httpx.HTTPError as exc:
        click.echo(f"error IO_FAILURE: cannot reach {cfg.url}: {exc}", err=True)
        sys.exit(EXIT_SERVER)
    if response.status_code >= 300:
        try:
            envelope = response.json()
        except ValueError:
            envelope = {"code": "INTERNAL", "message": response.text}
        message = f"error {envelope.get('code', 'INTERNAL')}: {envelope.get('message', '')}"
        click.echo(message, err=True)
        for detail in envelope.get("details", []):
            click.echo(f"  {detail.get('field')}: {detail.get('rule')}", err=True)
        sys.exit(exit_code_for_status(response.status_code))
    return response


def render_table(columns: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "object":
        return json.dumps({"columns": columns, "rows": rows},
                          separators=(",", ":"), ensure_ascii=False)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return buf.getvalue().rstrip("\r\n")
    cells = [columns] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in cells]
    return "\n".join(lines)


def emit(cfg: ClientConfig, response: httpx.Response, columns: list[str],
         rows: list[list]) -> None:
    """Print a table, or the raw response body for --format=object."""
    if cfg.output_format == "object":
        click.echo(response.text)
    else:
        click.echo(render_table(columns, rows, cfg.output_format))


def resolve_status_id(cfg: ClientConfig, name_or_id: str) -> int:
    if name_or_id.isdigit():
        return int(name_or_id)
    graph = request(cfg, "GET", "/statuses/graph").json()
    for level in graph["levels"]:
        if level["name"] == name_or_id:
            return level["status_id"]
    click.echo(f"error UNKNOWN_REFERENCE: no status named {name_or_id!r}", err=True)
    sys.exit(EXIT_NOT_FOUND)


@click.group()
@click.option("--url", default=None, help="Server base URL (env BTRS_URL).")
@click.option("--token", default=None, help="Session token (env BTRS_TOKEN).")
@click.option("--config-dir", default=None,
              help="Directory for the cached token (default ~/.config/btrs).")
@click.option("--format", "output_format", default="human",
              type=click.Choice(["human", "csv", "object"]),
              help="Output format for machine consumption.")
@click.pass_context
def main(ctx, url, token, config_dir, output_format):
    """Bug tracking and reporting service client."""
    ctx.obj = ClientConfig(url, token, config_dir, output_format)


@main.command()
@click.option("--bind", default=None, help="Bind address (default 127.0.0.1).")
@click.option("--port", default=None, type=int, help="Port (default 8430).")
@click.option("--data-dir", default=None, help="Journal directory (env BTRS_DATA_DIR).")
@click.option("--ui-dir", default=None, help="Static web UI directory to serve at /ui.")
@click.option("--config", "config_file", default=None, help="JSON config file.")
@click.option("--init-admin-password", default=None,
              help="Set the built-in admin password on first start.")
def serve(bind, port, data_dir, ui_dir, config_file, init_admin_password):
    """Run the HTTP service."""
    from .config import load_config
    from .server import serve as run_server
    config = load_config(config_file, bind=bind, port=port, data_dir=data_dir,
                         ui_dir=ui_dir, init_admin_password=init_admin_password)
    run_server(config)


@main.command()
@click.option("--username", prompt=True)
@click.option("--password", prompt=True, hide_input=True)
@click.pass_obj
def login(cfg: ClientConfig, username, password):
    """Authenticate and cache the session token."""
    response = request(cfg, "POST", "/session",
                       json_body={"username": username, "password": password},
                       need_token=False)
    body = response.json()
    cfg.save_token(body["token"])
    click.echo(f"logged in as {body['username']} ({body['role']}); "
               f"token cached at {cfg.token_path}")


@main.command()
@click.pass_obj
def logout(cfg: ClientConfig):
    """Revoke the cached session token."""
    request(cfg, "DELETE", "/session")
    if cfg.token_path.exists():
        cfg.token_path.unlink()
    click.echo("logged out")


@main.group()
def user():
    """User administration."""


@user.command("add")
@click.option("--username", required=True)
@click.option("--password", required=True)
@click.option("--role", required=True,
              type=click.Choice(["ADMIN", "MANAGER", "DEVELOPER"],
                                case_sensitive=False))
@click.pass_obj
def user_add(cfg: ClientConfig, username, password, role):
    response = request(cfg, "POST", "/users", json_body={
        "username": username, "password": password, "role": role.upper()})
    body = response.json()
    emit(cfg, response, ["user_id", "username", "role"],
         [[body["user_id"], body["username"], body["role"]]])


@user.command("list")
@click.pass_obj
def user_list(cfg: ClientConfig):
    response = request(cfg, "GET", "/users")
    rows = [[u["user_id"], u["username"], u["role"], u["active"]]
            for u in response.json()["users"]]
    emit(cfg, response, ["user_id", "username", "role", "active"], rows)


@main.group()
def severity():
    """Severity level master data."""


@severity.command("set")
@click.option("--id", "sev_id", type=int, default=None)
@click.option("--name", default=None)
@click.option("--rank", type=int, default=None)
@click.option("--desc", default="")
@click.option("--defaults", is_flag=True,
              help="Install the built-in five-tier severity scale.")
@click.pass_obj
def severity_set(cfg: ClientConfig, sev_id, name, rank, desc, defaults):
    if defaults:
        for level in DEFAULT_SEVERITIES:
            request(cfg, "PUT", f"/severities/{level.sev_id}", json_body={
                "name": level.name, "rank": level.rank,
                "description": level.description})
        click.echo(f"installed {len(DEFAULT_SEVERITIES)} severity levels")
        return
    if sev_id is None or name is None or rank is None:
        raise click.UsageError("--id, --name and --rank are required without --defaults")
    response = request(cfg, "PUT", f"/severities/{sev_id}", json_body={
        "name": name, "rank": rank, "description": desc})
    level = response.json()["level"]
    emit(cfg, response, ["sev_id", "name", "rank"],
         [[level["sev_id"], level["name"], level["rank"]]])


@severity.command("list")
@click.pass_obj
def severity_list(cfg: ClientConfig):
    response = request(cfg, "GET", "/severities")
    rows = [[s["sev_id"], s["name"], s["rank"], s["description"]]
            for s in response.json()["levels"]]
    emit(cfg, response, ["sev_id", "name", "rank", "description"], rows)


def _parse_edges(text: str) -> list[list[int]]:
    edges = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(">")
        if len(parts) != 2:
            raise click.UsageError(f"bad edge {chunk!r}; expected FROM>TO")
        edges.append([int(parts[0]), int(parts[1])])
    return edges


@main.group()
def status():
    """Status level master data and the transition graph."""


@status.command("set")
@click.option("--id", "status_id", type=int, default=None)
@click.option("--name", default=None)
@click.option("--rank", type=int, default=None)
@click.option("--initial", is_flag=True)
@click.option("--terminal", is_flag=True)
@click.option("--edges", default=None,
              help="Full edge list as id>id pairs, comma separated.")
@click.option("--file", "config_path", default=None,
              help="JSON file with {levels: [...], graph: {edges: [...]}}.")
@click.option("--defaults", is_flag=True,
              help="Install the built-in seven-status lifecycle.")
@click.pass_obj
def status_set(cfg: ClientConfig, status_id, name, rank, initial, terminal,
               edges, config_path, defaults):
    """Upsert one status level (with the full graph) or a whole configuration."""
    if defaults:
        body = {
            "levels": [
                {"status_id": lv.status_id, "name": lv.name, "rank": lv.rank,
                 "initial": lv.initial, "terminal": lv.terminal}
                for lv in DEFAULT_STATUSES
            ],
            "graph": {"edges": sorted([f, t] for f, t in DEFAULT_GRAPH_EDGES)},
        }
        request(cfg, "PUT", "/statuses", json_body=body)
        click.echo(f"installed {len(DEFAULT_STATUSES)} status levels and "
                   f"{len(DEFAULT_GRAPH_EDGES)} edges")
        return
    if config_path:
        body = json.loads(Path(config_path).read_text(encoding="utf-8"))
        request(cfg, "PUT", "/statuses", json_body=body)
        click.echo("status configuration replaced")
        return
    if status_id is None or name is None or rank is None or edges is None:
        raise click.UsageError(
            "--id, --name, --rank and --edges are required without --defaults/--file")
    response = request(cfg, "PUT", f"/statuses/{status_id}", json_body={
        "level": {"name": name, "rank": rank, "initial": initial,
                  "terminal": terminal},
        "graph": {"edges": _parse_edges(edges)},
    })
    level = response.json()["level"]
    emit(cfg, response, ["status_id", "name", "rank", "initial", "terminal"],
         [[level["status_id"], level["name"], level["rank"], level["initial"],
           level["terminal"]]])


@status.command("graph")
@click.pass_obj
def status_graph(cfg: ClientConfig):
    response = request(cfg, "GET", "/statuses/graph")
    body = response.json()
    by_id = {lv["status_id"]: lv["name"] for lv in body["levels"]}
    rows = [[by_id[f], by_id[t]] for f, t in body["edges"]]
    emit(cfg, response, ["from", "to"], rows)


@main.group(name="type")
def bug_type():
    """Bug type master data."""


@bug_type.command("add")
@click.option("--name", required=True)
@click.option("--desc", required=True)
@click.pass_obj
def type_add(cfg: ClientConfig, name, desc):
    response = request(cfg, "POST", "/bug-types", json_body={"name": name, "desc": desc})
    body = response.json()
    emit(cfg, response, ["type_id", "type_name", "type_desc"],
         [[body["type_id"], body["type_name"], body["type_desc"]]])


@bug_type.command("list")
@click.pass_obj
def type_list(cfg: ClientConfig):
    response = request(cfg, "GET", "/bug-types")
    rows = [[t["type_id"], t["type_name"], t["type_desc"]]
            for t in response.json()["types"]]
    emit(cfg, response, ["type_id", "type_name", "type_desc"], rows)


@main.group()
def project():
    """Projects and their lifecycle status."""


@project.command("add")
@click.option("--name", required=True)
@click.option("--desc", default="")
@click.option("--manager", "manager_id", type=int, required=True)
@click.pass_obj
def project_add(cfg: ClientConfig, name, desc, manager_id):
    response = request(cfg, "POST", "/projects", json_body={
        "name": name, "description": desc, "manager_id": manager_id})
    body = response.json()
    emit(cfg, response, ["project_id", "project_name", "status"],
         [[body["project_id"], body["project_name"], body["status_text"]]])


@project.command("status")
@click.option("--project", "project_id", type=int, required=True)
@click.option("--status", "status_text", required=True)
@click.pass_obj
def project_status(cfg: ClientConfig, project_id, status_text):
    response = request(cfg, "PUT", f"/projects/{project_id}/status",
                       json_body={"status": status_text})
    body = response.json()
    emit(cfg, response, ["project_id", "project_name", "status"],
         [[body["project_id"], body["project_name"], body["status_text"]]])


@project.command("list")
@click.pass_obj
def project_list(cfg: ClientConfig):
    response = request(cfg, "GET", "/projects")
    rows = [[p["project_id"], p["project_name"], p["status_text"], p["manager_id"]]
            for p in response.json()["projects"]]
    emit(cfg, response, ["project_id", "project_name", "status", "manager_id"], rows)


@main.group()
def module():
    """Project modules."""


@module.command("add")
@click.option("--project", "project_id", type=int, required=True)
@click.option("--name", required=True)
@click.option("--assignee", "assignee_id", type=int, default=None)
@click.pass_obj
def module_add(cfg: ClientConfig, project_id, name, assignee_id):
    response = request(cfg, "POST", f"/projects/{project_id}/modules",
                       json_body={"name": name, "assignee_id": assignee_id})
    body = response.json()
    emit(cfg, response, ["module_id", "project_id", "name", "assignee_id"],
         [[body["module_id"], body["project_id"], body["name"],
           body["assignee_id"]]])


@main.group()
def assign():
    """Responsibility assignments."""


@assign.command("project")
@click.option("--user", "user_id", type=int, required=True)
@click.option("--project", "project_id", type=int, required=True)
@click.option("--status", "status_text", default="ACTIVE")
@click.pass_obj
def assign_project(cfg: ClientConfig, user_id, project_id, status_text):
    response = request(cfg, "PUT", "/assignments", json_body={
        "user_id": user_id, "project_id": project_id, "status": status_text})
    body = response.json()
    emit(cfg, response, ["user_id", "project_id", "status"],
         [[body["user_id"], body["project_id"], body["status_text"]]])


@assign.command("bug")
@click.option("--bug", "bug_id", type=int, required=True)
@click.option("--developer", "developer_id", type=int, required=True)
@click.pass_obj
def assign_bug(cfg: ClientConfig, bug_id, developer_id):
    response = request(cfg, "POST", f"/bugs/{bug_id}/assign",
                       json_body={"assignee_id": developer_id})
    body = response.json()
    emit(cfg, response, ["bug_id", "assignee_id", "status_id"],
         [[body["bug_id"], body["assignee_id"], body["status_id"]]])


@main.group()
def bug():
    """Bug reporting and lifecycle."""


@bug.command("report")
@click.option("--name", "bug_name", required=True)
@click.option("--project", "project_id", type=int, required=True)
@click.option("--type", "type_id", type=int, required=True)
@click.option("--severity", "severity_id", type=int, required=True)
@click.option("--module", "module_id", type=int, default=None)
@click.option("--desc", "description", default="")
@click.pass_obj
def bug_report(cfg: ClientConfig, bug_name, project_id, type_id, severity_id,
               module_id, description):
    response = request(cfg, "POST", "/bugs", json_body={
        "bug_name": bug_name, "project_id": project_id, "type_id": type_id,
        "severity_id": severity_id, "module_id": module_id,
        "description": description})
    body = response.json()
    emit(cfg, response, ["bug_id", "bug_name", "status_id", "severity_id"],
         [[body["bug_id"], body["bug_name"], body["status_id"],
           body["severity_id"]]])


@bug.command("transition")
@click.argument("bug_id", type=int)
@click.option("--to", "to_status", required=True,
              help="Target status id or exact name.")
@click.option("--comment", default="")
@click.pass_obj
def bug_transition(cfg: ClientConfig, bug_id, to_status, comment):
    to_status_id = resolve_status_id(cfg, to_status)
    response = request(cfg, "POST", f"/bugs/{bug_id}/transition",
                       json_body={"to_status_id": to_status_id, "comment": comment})
    body = response.json()
    emit(cfg, response, ["bug_id", "from", "to", "at"],
         [[body["transition"]["bug_id"], body["transition"]["from_status_id"],
           body["transition"]["to_status_id"], body["transition"]["at"]]])


@bug.command("list")
@click.option("--project", "project_id", type=int, default=None)
@click.option("--assignee", "assignee_id", type=int, default=None)
@click.option("--open", "open_only", is_flag=True)
@click.option("--sort", default="triage", type=click.Choice(["triage", "id"]))
@click.pass_obj
def bug_list(cfg: ClientConfig, project_id, assignee_id, open_only, sort):
    params = {"sort": sort}
    if project_id is not None:
        params["project"] = project_id
    if assignee_id is not None:
        params["assignee"] = assignee_id
    if open_only:
        params["open"] = "true"
    response = request(cfg, "GET", "/bugs", params=params)
    rows = [[b["bug_id"], b["bug_name"], b["severity_id"], b["status_id"],
             b["project_id"], b["assignee_id"] if b["assignee_id"] is not None else ""]
            for b in response.json()["bugs"]]
    emit(cfg, response,
         ["bug_id", "bug_name", "severity_id", "status_id", "project_id", "assignee_id"],
         rows)


@bug.command("show")
@click.argument("bug_id", type=int)
@click.pass_obj
def bug_show(cfg: ClientConfig, bug_id):
    response = request(cfg, "GET", f"/bugs/{bug_id}")
    body = response.json()
    if cfg.output_format == "object":
        click.echo(response.text)
        return
    fields = ["bug_id", "bug_name", "project_id", "module_id", "type_id",
              "severity_id", "status_id", "reporter_id", "assignee_id",
              "created_at", "description"]
    rows = [[f, body[f] if body[f] is not None else ""] for f in fields]
    for entry in body["history"]:
        frm = entry["from_status_id"] if entry["from_status_id"] is not None else "-"
        rows.append(["history", f"{frm} -> {entry['to_status_id']} at {entry['at']}"])
    click.echo(render_table(["field", "value"], rows, cfg.output_format))


@main.group()
def report():
    """Reports; --format csv streams the server's CSV export."""


def _report(cfg: ClientConfig, path: str, params: dict, out: Optional[str]):
    if cfg.output_format == "csv":
        params = {**params, "format": "csv"}
    response = request(cfg, "GET", path, params=params)
    if out:
        Path(out).write_bytes(response.content)
        click.echo(f"wrote {out}")
        return
    if cfg.output_format in ("csv", "object"):
        click.echo(response.text.rstrip("\n"))
        return
    body = response.json()
    click.echo(render_table(body["columns"],
                            [[c if c is not None else "" for c in row]
                             for row in body["rows"]], "human"))


@report.command("matrix")
@click.option("--project", "project_id", type=int, default=None)
@click.option("--out", default=None, help="Write the export to a file.")
@click.pass_obj
def report_matrix(cfg: ClientConfig, project_id, out):
    params = {} if project_id is None else {"project": project_id}
    _report(cfg, "/reports/matrix", params, out)


@report.command("workload")
@click.option("--user", "user_id", type=int, default=None)
@click.option("--out", default=None)
@click.pass_obj
def report_workload(cfg: ClientConfig, user_id, out):
    params = {} if user_id is None else {"user": user_id}
    _report(cfg, "/reports/workload", params, out)


@report.command("project")
@click.argument("project_id", type=int)
@click.option("--out", default=None)
@click.pass_obj
def report_project(cfg: ClientConfig, project_id, out):
    _report(cfg, f"/reports/project/{project_id}", {}, out)


@main.command()
@click.option("--kloc", type=float, required=True)
@click.option("--mode", required=True)
@click.pass_obj
def estimate(cfg: ClientConfig, kloc, mode):
    """Basic COCOMO effort estimate with the phase breakdown."""
    response = request(cfg, "GET", "/estimate", params={"kloc": kloc, "mode": mode})
    body = response.json()
    if cfg.output_format == "object":
        click.echo(response.text)
        return
    click.echo(f"effort: {body['effort_pm']:.2f} PM "
               f"({body['mode']}, {body['kloc']:g} KLOC)")
    rows = [[p["phase"], f"{p['person_months']:.2f} PM"] for p in body["phases"]]
    click.echo(render_table(["phase", "person_months"], rows,
                            "csv" if cfg.output_format == "csv" else "human"))


if __name__ == "__main__":
    main()
