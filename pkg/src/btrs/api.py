"""HTTP surface: every service operation behind authenticated REST routes.

All request and response bodies are JSON. Every non-2xx response body is
a single error envelope {"code", "message", "details"?} whose code comes
from the closed set in errors.HTTP_STATUS_BY_CODE.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.staticfiles import StaticFiles

from .domain import Bug, BugDraft, Role, StatusLevel
from .errors import HTTP_STATUS_BY_CODE, BtrsError, TokenMissing, ValidationFailed
from .estimation import CocomoEstimate
from .reporting import Report, export_csv, export_json
from .service import BugTracker

logger = logging.getLogger("btrs.http")

# Listings are capped rather than paginated.
MAX_LIST_ROWS = 500


# -- wire serialization -------------------------------------------------------

def user_to_dict(user) -> dict:
    # credential deliberately absent: verifiers never cross the API
    return {"user_id": user.user_id, "username": user.username,
            "role": user.role.value, "active": user.active}


def severity_to_dict(level) -> dict:
    return {"sev_id": level.sev_id, "name": level.name, "rank": level.rank,
            "description": level.description}


def status_to_dict(level) -> dict:
    return {"status_id": level.status_id, "name": level.name, "rank": level.rank,
            "initial": level.initial, "terminal": level.terminal}


def graph_to_dict(state) -> dict:
    return {
        "levels": [status_to_dict(s)
                   for s in sorted(state.statuses.values(), key=lambda s: s.rank)],
        "edges": [list(e) for e in sorted(state.graph_edges)],
    }


def bug_type_to_dict(t) -> dict:
    return {"type_id": t.type_id, "type_name": t.type_name, "type_desc": t.type_desc}


def project_to_dict(p) -> dict:
    return {"project_id": p.project_id, "project_name": p.project_name,
            "description": p.description, "status_text": p.status_text,
            "manager_id": p.manager_id}


def module_to_dict(m) -> dict:
    return {"module_id": m.module_id, "project_id": m.project_id, "name": m.name,
            "assignee_id": m.assignee_id}


def assignment_to_dict(a) -> dict:
    return {"user_id": a.user_id, "project_id": a.project_id,
            "status_text": a.status_text}


def transition_to_dict(t) -> dict:
    return {"bug_id": t.bug_id, "from_status_id": t.from_status_id,
            "to_status_id": t.to_status_id, "actor_id": t.actor_id, "at": t.at,
            "comment": t.comment}


def bug_to_dict(bug: Bug) -> dict:
    return {
        "bug_id": bug.bug_id,
        "bug_name": bug.bug_name,
        "project_id": bug.project_id,
        "module_id": bug.module_id,
        "type_id": bug.type_id,
        "severity_id": bug.severity_id,
        "status_id": bug.status_id,
        "reporter_id": bug.reporter_id,
        "assignee_id": bug.assignee_id,
        "description": bug.description,
        "created_at": bug.created_at,
        "history": [transition_to_dict(t) for t in bug.history],
    }


def estimate_to_dict(est: CocomoEstimate) -> dict:
    return {
        "kloc": est.kloc,
        "mode": est.mode,
        "effort_pm": est.effort_pm,
        "phases": [{"phase": name, "person_months": pm} for name, pm in est.phases],
    }


# -- request bodies -----------------------------------------------------------

class LoginBody(BaseModel):
    username: str = ""
    password: str = ""


class UserBody(BaseModel):
    username: str = ""
    password: str = ""
    role: str = ""


class SeverityBody(BaseModel):
    name: str = ""
    rank: int = 0
    description: str = ""


class StatusLevelBody(BaseModel):
    status_id: Optional[int] = None
    name: str = ""
    rank: int = 0
    initial: bool = False
    terminal: bool = False


class GraphBody(BaseModel):
    edges: list[tuple[int, int]] = []


class StatusPutBody(BaseModel):
    level: StatusLevelBody
    graph: GraphBody


class StatusConfigBody(BaseModel):
    levels: list[StatusLevelBody]
    graph: GraphBody


class BugTypeBody(BaseModel):
    name: str = ""
    desc: str = ""


class ProjectBody(BaseModel):
    name: str = ""
    description: str = ""
    manager_id: Optional[int] = None


class ModuleBody(BaseModel):
    name: str = ""
    assignee_id: Optional[int] = None


class ProjectStatusBody(BaseModel):
    status: str = ""


class AssignmentBody(BaseModel):
    user_id: Optional[int] = None
    project_id: Optional[int] = None
    status: str = ""


class BugBody(BaseModel):
    bug_name: str = ""
    project_id: Optional[int] = None
    module_id: Optional[int] = None
    type_id: Optional[int] = None
    severity_id: Optional[int] = None
    description: str = ""


class AssignBugBody(BaseModel):
    assignee_id: Optional[int] = None


class TransitionBody(BaseModel):
    to_status_id: Optional[int] = None
    comment: str = ""


def _parse_role(text: str) -> Role:
    try:
        return Role(text.upper())
    except ValueError:
        raise ValidationFailed(f"unknown role {text!r}",
                               details=[{"field": "role", "rule": "must be ADMIN, "
                                         "MANAGER or DEVELOPER"}])


def _error_response(code: str, message: str, details: list | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if details:
        body["details"] = details
    return JSONResponse(status_code=HTTP_STATUS_BY_CODE.get(code, 500), content=body)


def create_app(service: BugTracker, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="btrs", docs_url=None, redoc_url=None, openapi_url=None)

    def token_of(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer ") or not header[7:].strip():
            raise TokenMissing("missing bearer token")
        return header[7:].strip()

    def report_response(report: Report, format: Optional[str]) -> Response:
        if format == "csv":
            return Response(content=export_csv(report), media_type="text/csv",
                            headers={"Content-Disposition":
                                     f'attachment; filename="{report.kind.lower()}.csv"'})
        return Response(content=export_json(report), media_type="application/json")

    @app.exception_handler(BtrsError)
    async def handle_domain_error(request: Request, exc: BtrsError):
        return _error_response(exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def handle_request_validation(request: Request, exc: RequestValidationError):
        details = [{"field": ".".join(str(p) for p in err["loc"]), "rule": err["msg"]}
                   for err in exc.errors()]
        return _error_response("VALIDATION_FAILED", "request body or query invalid",
                               details)

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(request: Request, exc: StarletteHTTPException):
        if exc.status_code == 404:
            return _error_response("NOT_FOUND", "no such route or resource")
        if exc.status_code == 405:
            return _error_response("METHOD_NOT_ALLOWED", "method not allowed here")
        return _error_response("INTERNAL", str(exc.detail))

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        duration_ms = (time.perf_counter() - started) * 1000.0
        logger.info("%s %s -> %d (%.1f ms)", request.method, request.url.path,
                    response.status_code, duration_ms)
        return response

    # -- sessions -----------------------------------------------------------

    @app.post("/session")
    def login(body: LoginBody):
        session = service.login(body.username, body.password)
        user = service.state.users[session.user_id]
        return {"token": session.token, "user_id": user.user_id,
                "username": user.username, "role": user.role.value,
                "expires_at": session.expires_at.isoformat()}

    @app.delete("/session")
    def logout(token: str = Depends(token_of)):
        service.logout(token)
        return {"ok": True}

    # -- users ----------------------------------------------------------------

    @app.post("/users", status_code=201)
    def create_user(body: UserBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "manage_users")
        user = service.register_user(actor, body.username, body.password,
                                     _parse_role(body.role))
        return user_to_dict(user)

    @app.get("/users")
    def list_users(token: str = Depends(token_of)):
        actor = service.authorize(token, "manage_users")
        return {"users": [user_to_dict(u) for u in service.list_users(actor)]}

    # -- master data ----------------------------------------------------------

    @app.put("/severities/{sev_id}")
    def put_severity(sev_id: int, body: SeverityBody, response: Response,
                     token: str = Depends(token_of)):
        actor = service.authorize(token, "upsert_severity")
        created = sev_id not in service.state.severities
        level = service.upsert_severity(actor, sev_id, body.name, body.rank,
                                        body.description)
        response.status_code = 201 if created else 200
        return {"level": severity_to_dict(level)}

    @app.get("/severities")
    def list_severities(token: str = Depends(token_of)):
        service.resolve_token(token)
        levels = sorted(service.state.severities.values(), key=lambda s: s.rank)
        return {"levels": [severity_to_dict(s) for s in levels]}

    @app.put("/statuses/{status_id}")
    def put_status(status_id: int, body: StatusPutBody, response: Response,
                   token: str = Depends(token_of)):
        actor = service.authorize(token, "upsert_status")
        created = status_id not in service.state.statuses
        level = StatusLevel(status_id=status_id, name=body.level.name,
                            rank=body.level.rank, initial=body.level.initial,
                            terminal=body.level.terminal)
        service.upsert_status(actor, level, set(body.graph.edges))
        response.status_code = 201 if created else 200
        return {"level": status_to_dict(service.state.statuses[status_id]),
                "graph": graph_to_dict(service.state)}

    @app.put("/statuses")
    def put_status_config(body: StatusConfigBody, token: str = Depends(token_of)):
        """Atomic multi-level + graph replacement; the only way to configure
        a lifecycle onto empty tables."""
        actor = service.authorize(token, "upsert_status")
        levels = []
        for raw in body.levels:
            if raw.status_id is None:
                raise ValidationFailed("every level needs a status_id",
                                       details=[{"field": "status_id",
                                                 "rule": "must be present"}])
            levels.append(StatusLevel(status_id=raw.status_id, name=raw.name,
                                      rank=raw.rank, initial=raw.initial,
                                      terminal=raw.terminal))
        service.replace_status_config(actor, levels, set(body.graph.edges))
        return graph_to_dict(service.state)

    @app.get("/statuses/graph")
    def get_graph(token: str = Depends(token_of)):
        service.resolve_token(token)
        return graph_to_dict(service.state)

    @app.post("/bug-types", status_code=201)
    def create_bug_type(body: BugTypeBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "create_bug_type")
        return bug_type_to_dict(service.create_bug_type(actor, body.name, body.desc))

    @app.get("/bug-types")
    def list_bug_types(token: str = Depends(token_of)):
        service.resolve_token(token)
        types = sorted(service.state.bug_types.values(), key=lambda t: t.type_id)
        return {"types": [bug_type_to_dict(t) for t in types]}

    # -- projects -------------------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(body: ProjectBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "create_project")
        if body.manager_id is None:
            raise ValidationFailed("manager_id must be present",
                                   details=[{"field": "manager_id",
                                             "rule": "must be present"}])
        project = service.create_project(actor, body.name, body.description,
                                         body.manager_id)
        return project_to_dict(project)

    @app.get("/projects")
    def list_projects(token: str = Depends(token_of)):
        service.resolve_token(token)
        projects = sorted(service.state.projects.values(), key=lambda p: p.project_id)
        return {"projects": [project_to_dict(p) for p in projects]}

    @app.post("/projects/{project_id}/modules", status_code=201)
    def add_module(project_id: int, body: ModuleBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "add_module")
        module = service.add_module(actor, project_id, body.name, body.assignee_id)
        return module_to_dict(module)

    @app.put("/projects/{project_id}/status")
    def set_project_status(project_id: int, body: ProjectStatusBody,
                           token: str = Depends(token_of)):
        actor = service.authorize(token, "set_project_status")
        return project_to_dict(service.set_project_status(actor, project_id, body.status))

    @app.put("/assignments")
    def put_assignment(body: AssignmentBody, response: Response,
                       token: str = Depends(token_of)):
        actor = service.authorize(token, "assign_project")
        if body.user_id is None or body.project_id is None:
            raise ValidationFailed(
                "user_id and project_id must be present",
                details=[{"field": f, "rule": "must be present"}
                         for f in ("user_id", "project_id")
                         if getattr(body, f) is None])
        created = (body.user_id, body.project_id) not in service.state.assignments
        assignment = service.assign_project(actor, body.user_id, body.project_id,
                                            body.status)
        response.status_code = 201 if created else 200
        return assignment_to_dict(assignment)

    # -- bugs -------------------------------------------------------------------

    @app.post("/bugs", status_code=201)
    def report_bug(body: BugBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "report_bug")
        draft = BugDraft(bug_name=body.bug_name, project_id=body.project_id,
                         type_id=body.type_id, severity_id=body.severity_id,
                         module_id=body.module_id, description=body.description)
        return bug_to_dict(service.report_bug(actor, draft))

    @app.get("/bugs")
    def list_bugs(project: Optional[int] = Query(default=None),
                  assignee: Optional[int] = Query(default=None),
                  open_only: Optional[bool] = Query(default=None, alias="open"),
                  sort: str = Query(default="triage"),
                  token: str = Depends(token_of)):
        viewer = service.authorize(token, "view_reports")
        if sort not in ("triage", "id"):
            raise ValidationFailed(f"unknown sort {sort!r}",
                                   details=[{"field": "sort",
                                             "rule": "must be triage or id"}])
        bugs = service.triage_queue(viewer, project_id=project, assignee_id=assignee,
                                    open_only=bool(open_only))
        if sort == "id":
            bugs = sorted(bugs, key=lambda b: b.bug_id)
        return {"bugs": [bug_to_dict(b) for b in bugs[:MAX_LIST_ROWS]]}

    @app.get("/bugs/{bug_id}")
    def get_bug(bug_id: int, token: str = Depends(token_of)):
        viewer = service.authorize(token, "view_reports")
        return bug_to_dict(service.get_bug(viewer, bug_id))

    @app.post("/bugs/{bug_id}/assign")
    def assign_bug(bug_id: int, body: AssignBugBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "assign_bug")
        if body.assignee_id is None:
            raise ValidationFailed("assignee_id must be present",
                                   details=[{"field": "assignee_id",
                                             "rule": "must be present"}])
        return bug_to_dict(service.assign_bug(actor, bug_id, body.assignee_id))

    @app.post("/bugs/{bug_id}/transition")
    def transition_bug(bug_id: int, body: TransitionBody, token: str = Depends(token_of)):
        actor = service.authorize(token, "transition_bug")
        if body.to_status_id is None:
            raise ValidationFailed("to_status_id must be present",
                                   details=[{"field": "to_status_id",
                                             "rule": "must be present"}])
        transition = service.transition_bug(actor, bug_id, body.to_status_id,
                                            body.comment)
        return {"transition": transition_to_dict(transition),
                "bug": bug_to_dict(service.state.bugs[bug_id])}

    # -- reports and estimation -------------------------------------------------

    @app.get("/reports/matrix")
    def report_matrix(project: Optional[int] = Query(default=None),
                      format: Optional[str] = Query(default=None),
                      token: str = Depends(token_of)):
        viewer = service.authorize(token, "view_reports")
        report = service.severity_status_matrix(viewer, project_id=project)
        return report_response(report, format)

    @app.get("/reports/workload")
    def report_workload(user: Optional[int] = Query(default=None),
                        format: Optional[str] = Query(default=None),
                        token: str = Depends(token_of)):
        viewer = service.authorize(token, "view_reports")
        report = service.user_workload(viewer, user_id=user)
        return report_response(report, format)

    @app.get("/reports/project/{project_id}")
    def report_project(project_id: int, format: Optional[str] = Query(default=None),
                       token: str = Depends(token_of)):
        viewer = service.authorize(token, "view_reports")
        report = service.project_summary(viewer, project_id)
        return report_response(report, format)

    @app.get("/estimate")
    def estimate(kloc: float = Query(...), mode: str = Query(...),
                 token: str = Depends(token_of)):
        actor = service.authorize(token, "estimate_cost")
        return estimate_to_dict(service.estimate(actor, kloc, mode))

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
