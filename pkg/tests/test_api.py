"""HTTP surface: auth gates, error envelopes, status mapping, route behavior."""

from __future__ import annotations

import csv
import hashlib
import io
import json

import pytest
from fastapi.testclient import TestClient

from btrs.api import create_app
from btrs.errors import HTTP_STATUS_BY_CODE
from tests.conftest import ADMIN_PASSWORD


@pytest.fixture
def client(seeded):
    app = create_app(seeded["tracker"])
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture
def tokens(client):
    out = {}
    for username, password, role in [
        ("admin", ADMIN_PASSWORD, "ADMIN"),
        ("manager1", "manager-pw-1", "MANAGER"),
        ("dev1", "developer-pw-1", "DEVELOPER"),
    ]:
        response = client.post("/session", json={"username": username,
                                                 "password": password})
        assert response.status_code == 200, response.text
        body = response.json()
        assert body["role"] == role
        out[role] = body["token"]
    return out


def auth(tokens, role="ADMIN"):
    return {"Authorization": f"Bearer {tokens[role]}"}


def file_bug(client, tokens, name="Crash on save", severity=1):
    response = client.post("/bugs", json={
        "bug_name": name, "project_id": 1, "type_id": 1, "severity_id": severity,
    }, headers=auth(tokens, "DEVELOPER"))
    assert response.status_code == 201, response.text
    return response.json()


class TestSessions:
    def test_login_returns_token_with_expiry(self, client):
        response = client.post("/session", json={"username": "admin",
                                                 "password": ADMIN_PASSWORD})
        body = response.json()
        assert response.status_code == 200
        assert len(body["token"]) >= 40
        assert body["expires_at"] > body["token"][:0]  # present and non-empty

    def test_wrong_password_and_unknown_user_payloads_byte_identical(self, client):
        wrong = client.post("/session", json={"username": "admin", "password": "x" * 8})
        unknown = client.post("/session", json={"username": "ghost", "password": "x" * 8})
        assert wrong.status_code == unknown.status_code == 401
        assert wrong.content == unknown.content
        assert wrong.json()["code"] == "INVALID_CREDENTIALS"

    def test_logout_invalidates_token(self, client, tokens):
        headers = auth(tokens, "DEVELOPER")
        assert client.delete("/session", headers=headers).status_code == 200
        response = client.get("/bugs", headers=headers)
        assert response.status_code == 401
        assert response.json()["code"] == "TOKEN_UNKNOWN"

    def test_missing_token_is_401_token_missing(self, client):
        response = client.post("/bugs/5/transition", json={"to_status_id": 2})
        assert response.status_code == 401
        assert response.json()["code"] == "TOKEN_MISSING"

    def test_garbage_token_is_401_token_unknown(self, client):
        response = client.get("/bugs", headers={"Authorization": "Bearer nope"})
        assert response.status_code == 401
        assert response.json()["code"] == "TOKEN_UNKNOWN"


class TestErrorMapping:
    def test_permission_denied_403(self, client, tokens):
        response = client.post("/users", json={
            "username": "x", "password": "password-1", "role": "DEVELOPER",
        }, headers=auth(tokens, "DEVELOPER"))
        assert response.status_code == 403
        assert response.json()["code"] == "PERMISSION_DENIED"

    def test_illegal_transition_409_names_edge(self, client, tokens):
        bug = file_bug(client, tokens)
        closed = client.post(f"/bugs/{bug['bug_id']}/transition",
                             json={"to_status_id": 6}, headers=auth(tokens, "MANAGER"))
        assert closed.status_code == 200
        response = client.post(f"/bugs/{bug['bug_id']}/transition",
                               json={"to_status_id": 3},
                               headers=auth(tokens, "MANAGER"))
        assert response.status_code == 409
        body = response.json()
        assert body["code"] == "ILLEGAL_TRANSITION"
        assert "CLOSED" in body["message"] and "IN_PROGRESS" in body["message"]

    def test_rank_collision_409(self, client, tokens):
        response = client.put("/severities/9", json={"name": "Urgent", "rank": 1},
                              headers=auth(tokens))
        assert response.status_code == 409
        assert response.json()["code"] == "RANK_COLLISION"

    def test_validation_422_with_field_details(self, client, tokens):
        response = client.post("/bugs", json={"project_id": 1, "type_id": 1,
                                              "severity_id": 1},
                               headers=auth(tokens, "DEVELOPER"))
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "VALIDATION_FAILED"
        assert any(d["field"] == "bug_name" for d in body["details"])

    def test_unknown_resource_404(self, client, tokens):
        response = client.get("/bugs/999", headers=auth(tokens))
        assert response.status_code == 404
        assert response.json()["code"] == "UNKNOWN_BUG"

    def test_unknown_route_is_enveloped_404(self, client):
        response = client.get("/no-such-route")
        assert response.status_code == 404
        assert response.json() == {"code": "NOT_FOUND",
                                   "message": "no such route or resource"}

    def test_every_documented_code_maps_to_a_4xx_5xx_status(self):
        for code, status in HTTP_STATUS_BY_CODE.items():
            assert 400 <= status <= 599, code

    def test_envelope_shape_is_uniform(self, client, tokens):
        failures = [
            client.post("/session", json={"username": "ghost", "password": "p" * 8}),
            client.get("/bugs/999", headers=auth(tokens)),
            client.get("/bugs", headers={"Authorization": "Bearer bad"}),
            client.put("/severities/9", json={"name": "Urgent", "rank": 1},
                       headers=auth(tokens)),
        ]
        for response in failures:
            body = response.json()
            assert set(body) <= {"code", "message", "details"}
            assert body["code"] in HTTP_STATUS_BY_CODE
            assert HTTP_STATUS_BY_CODE[body["code"]] == response.status_code


class TestMasterDataRoutes:
    def test_put_severity_insert_201_update_200(self, client, tokens):
        insert = client.put("/severities/9", json={"name": "Paperwork", "rank": 9},
                            headers=auth(tokens))
        assert insert.status_code == 201
        update = client.put("/severities/9", json={"name": "Paperwork", "rank": 8},
                            headers=auth(tokens))
        assert update.status_code == 200
        assert update.json()["level"]["rank"] == 8

    def test_statuses_graph_roundtrip(self, client, tokens):
        response = client.get("/statuses/graph", headers=auth(tokens, "DEVELOPER"))
        body = response.json()
        assert len(body["levels"]) == 7
        assert [1, 2] in body["edges"]

    def test_put_status_carries_level_and_graph(self, client, tokens):
        graph = client.get("/statuses/graph", headers=auth(tokens)).json()
        edges = graph["edges"] + [[1, 8], [8, 2]]
        response = client.put("/statuses/8", json={
            "level": {"name": "TRIAGED", "rank": 8, "initial": False,
                      "terminal": False},
            "graph": {"edges": edges},
        }, headers=auth(tokens))
        assert response.status_code == 201
        assert response.json()["level"]["name"] == "TRIAGED"
        assert len(response.json()["graph"]["edges"]) == len(edges)

    def test_bug_types_create_and_list(self, client, tokens):
        response = client.post("/bug-types", json={"name": "UI", "desc": "rendering"},
                               headers=auth(tokens))
        assert response.status_code == 201
        listing = client.get("/bug-types", headers=auth(tokens, "DEVELOPER"))
        names = [t["type_name"] for t in listing.json()["types"]]
        assert "UI" in names

    def test_assignments_upsert_200_on_existing(self, client, tokens):
        body = {"user_id": 3, "project_id": 1, "status": "COMPLETED"}
        response = client.put("/assignments", json=body, headers=auth(tokens, "MANAGER"))
        assert response.status_code == 200  # seeded fixture already assigned dev1
        fresh = client.put("/assignments",
                           json={"user_id": 2, "project_id": 1, "status": "ACTIVE"},
                           headers=auth(tokens))
        assert fresh.status_code == 201


class TestBugRoutes:
    def test_report_assign_transition_flow(self, client, tokens):
        bug = file_bug(client, tokens)
        assigned = client.post(f"/bugs/{bug['bug_id']}/assign",
                               json={"assignee_id": 3},
                               headers=auth(tokens, "MANAGER"))
        assert assigned.status_code == 200
        assert assigned.json()["status_id"] == 2  # auto-transition NEW -> ASSIGNED
        moved = client.post(f"/bugs/{bug['bug_id']}/transition",
                            json={"to_status_id": 3, "comment": "working"},
                            headers=auth(tokens, "DEVELOPER"))
        assert moved.status_code == 200
        assert moved.json()["bug"]["status_id"] == 3
        assert moved.json()["transition"]["comment"] == "working"

    def test_bugs_sorted_by_triage_order(self, client, tokens, seeded):
        file_bug(client, tokens, "minor one", severity=4)
        file_bug(client, tokens, "blocker", severity=1)
        file_bug(client, tokens, "major", severity=3)
        response = client.get("/bugs", params={"sort": "triage"},
                              headers=auth(tokens, "MANAGER"))
        got = [b["bug_id"] for b in response.json()["bugs"]]
        tracker = seeded["tracker"]
        expected = [b.bug_id for b in tracker.triage_queue(seeded["admin"])]
        assert got == expected

    def test_open_filter_excludes_closed(self, client, tokens):
        bug = file_bug(client, tokens)
        client.post(f"/bugs/{bug['bug_id']}/transition", json={"to_status_id": 6},
                    headers=auth(tokens, "MANAGER"))
        keep = file_bug(client, tokens, "still open")
        response = client.get("/bugs", params={"open": "true"},
                              headers=auth(tokens, "MANAGER"))
        ids = [b["bug_id"] for b in response.json()["bugs"]]
        assert keep["bug_id"] in ids and bug["bug_id"] not in ids

    def test_developer_list_scoped_to_own_bugs(self, client, tokens):
        mine = file_bug(client, tokens)
        client.post(f"/bugs/{mine['bug_id']}/assign", json={"assignee_id": 3},
                    headers=auth(tokens, "MANAGER"))
        other = file_bug(client, tokens, "someone elses")
        client.post(f"/bugs/{other['bug_id']}/assign", json={"assignee_id": 4},
                    headers=auth(tokens, "MANAGER"))
        response = client.get("/bugs", headers=auth(tokens, "DEVELOPER"))
        ids = [b["bug_id"] for b in response.json()["bugs"]]
        assert ids == [mine["bug_id"]]


class TestReportsAndEstimate:
    def test_matrix_json_and_csv_agree(self, client, tokens):
        file_bug(client, tokens)
        body = client.get("/reports/matrix", headers=auth(tokens, "MANAGER")).json()
        csv_text = client.get("/reports/matrix", params={"format": "csv"},
                              headers=auth(tokens, "MANAGER")).text
        rows = list(csv.reader(io.StringIO(csv_text)))
        assert rows[0] == body["columns"]
        assert [[str(c) for c in row] for row in body["rows"]] == rows[1:]

    def test_csv_media_type(self, client, tokens):
        response = client.get("/reports/matrix", params={"format": "csv"},
                              headers=auth(tokens, "MANAGER"))
        assert response.headers["content-type"].startswith("text/csv")

    def test_workload_scoping_for_developer(self, client, tokens):
        denied = client.get("/reports/workload", params={"user": 1},
                            headers=auth(tokens, "DEVELOPER"))
        assert denied.status_code == 403
        own = client.get("/reports/workload", headers=auth(tokens, "DEVELOPER"))
        assert own.status_code == 200
        assert all(row[0] == "dev1" for row in own.json()["rows"])

    def test_project_summary_route(self, client, tokens):
        response = client.get("/reports/project/1", headers=auth(tokens, "MANAGER"))
        fields = {row[0]: row[1] for row in response.json()["rows"]}
        assert fields["project_name"] == "Billing"
        assert fields["module_count"] == 1

    def test_estimate_route(self, client, tokens):
        response = client.get("/estimate", params={"kloc": 1.0, "mode": "organic"},
                              headers=auth(tokens, "MANAGER"))
        body = response.json()
        assert body["effort_pm"] == pytest.approx(2.4)
        assert [p["phase"] for p in body["phases"]] == [
            "Engineering", "Design", "Code and unit or module test",
            "System Test and Integration"]

    def test_estimate_denied_for_developer(self, client, tokens):
        response = client.get("/estimate", params={"kloc": 1.0, "mode": "organic"},
                              headers=auth(tokens, "DEVELOPER"))
        assert response.status_code == 403

    def test_estimate_validation(self, client, tokens):
        zero = client.get("/estimate", params={"kloc": 0, "mode": "organic"},
                          headers=auth(tokens))
        assert zero.status_code == 422
        assert zero.json()["code"] == "NONPOSITIVE_KLOC"
        bad_mode = client.get("/estimate", params={"kloc": 1, "mode": "agile"},
                              headers=auth(tokens))
        assert bad_mode.status_code == 422
        assert bad_mode.json()["code"] == "UNKNOWN_MODE"
        garbage = client.get("/estimate", params={"kloc": "abc", "mode": "organic"},
                             headers=auth(tokens))
        assert garbage.status_code == 422
        assert garbage.json()["code"] == "VALIDATION_FAILED"


class TestListCapAndStatic:
    def test_bug_listing_capped_at_500_rows(self, seeded):
        from btrs.api import MAX_LIST_ROWS
        tracker, dev1 = seeded["tracker"], seeded["dev1"]
        from tests.conftest import make_draft
        for i in range(MAX_LIST_ROWS + 10):
            tracker.report_bug(dev1, make_draft(seeded["project"], bug_name=f"cap{i}"))
        app = create_app(tracker)
        with TestClient(app) as client:
            token = client.post("/session", json={
                "username": "admin", "password": ADMIN_PASSWORD}).json()["token"]
            response = client.get("/bugs",
                                  headers={"Authorization": f"Bearer {token}"})
            assert len(response.json()["bugs"]) == MAX_LIST_ROWS

    def test_ui_mounted_only_when_directory_exists(self, seeded, tmp_path):
        ui_dir = tmp_path / "dist"
        ui_dir.mkdir()
        (ui_dir / "index.html").write_text("<html><body>btrs ui</body></html>")
        with TestClient(create_app(seeded["tracker"], ui_dir=str(ui_dir))) as client:
            response = client.get("/ui/")
            assert response.status_code == 200
            assert "btrs ui" in response.text
        with TestClient(create_app(seeded["tracker"], ui_dir=None)) as client:
            response = client.get("/ui/")
            assert response.status_code == 404
            assert response.json()["code"] == "NOT_FOUND"


class TestGetSideEffectFreedom:
    def test_gets_leave_journal_byte_identical(self, client, tokens, seeded):
        file_bug(client, tokens)
        journal = seeded["tracker"].store.journal_path
        before = hashlib.sha256(journal.read_bytes()).hexdigest()
        for path, params, role in [
            ("/bugs", {}, "MANAGER"),
            ("/bugs/1", {}, "MANAGER"),
            ("/users", {}, "ADMIN"),
            ("/projects", {}, "DEVELOPER"),
            ("/bug-types", {}, "DEVELOPER"),
            ("/severities", {}, "DEVELOPER"),
            ("/statuses/graph", {}, "DEVELOPER"),
            ("/reports/matrix", {"format": "csv"}, "MANAGER"),
            ("/reports/workload", {}, "MANAGER"),
            ("/reports/project/1", {}, "MANAGER"),
            ("/estimate", {"kloc": 5, "mode": "embedded"}, "MANAGER"),
        ]:
            response = client.get(path, params=params, headers=auth(tokens, role))
            assert response.status_code == 200, (path, response.text)
        after = hashlib.sha256(journal.read_bytes()).hexdigest()
        assert before == after

    def test_report_exports_deterministic_for_fixed_state(self, client, tokens):
        file_bug(client, tokens)
        first = client.get("/reports/matrix", headers=auth(tokens, "MANAGER")).content
        second = client.get("/reports/matrix", headers=auth(tokens, "MANAGER")).content
        assert first == second
