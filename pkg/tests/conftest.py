from __future__ import annotations

import socket
import subprocess
import sys
import time
from datetime import datetime, timedelta, timezone

import httpx
import pytest

from btrs.domain import (
    DEFAULT_GRAPH_EDGES,
    DEFAULT_SEVERITIES,
    DEFAULT_STATUSES,
    BugDraft,
    Role,
)
from btrs.service import BugTracker
from btrs.store import Store

ADMIN_PASSWORD = "admin-secret-1"


class FakeClock:
    """Deterministic clock: starts at a fixed instant, ticks 1s per call."""

    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2026, 1, 1, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        current = self.now
        self.now = current + timedelta(seconds=1)
        return current


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def store(tmp_path, clock):
    s = Store(tmp_path / "data", clock=clock)
    yield s
    s.close()


@pytest.fixture
def tracker(store):
    """Service with the bootstrap admin's password initialized."""
    t = BugTracker(store)
    t.init_admin_password(ADMIN_PASSWORD)
    return t


@pytest.fixture
def admin(tracker):
    return tracker.state.users[1]


def install_default_master_data(tracker, admin):
    for sev in DEFAULT_SEVERITIES:
        tracker.upsert_severity(admin, sev.sev_id, sev.name, sev.rank, sev.description)
    tracker.replace_status_config(admin, list(DEFAULT_STATUSES), set(DEFAULT_GRAPH_EDGES))
    tracker.create_bug_type(admin, "Functional", "Behavior diverges from requirements")


@pytest.fixture
def seeded(tracker, admin):
    """Tracker with default master data, one manager, two developers, one
    project with a module, and both developers assigned to the project."""
    install_default_master_data(tracker, admin)
    manager = tracker.register_user(admin, "manager1", "manager-pw-1", Role.MANAGER)
    dev1 = tracker.register_user(admin, "dev1", "developer-pw-1", Role.DEVELOPER)
    dev2 = tracker.register_user(admin, "dev2", "developer-pw-2", Role.DEVELOPER)
    project = tracker.create_project(manager, "Billing", "Invoicing pipeline", manager.user_id)
    tracker.add_module(manager, project.project_id, "ledger", dev1.user_id)
    tracker.assign_project(manager, dev1.user_id, project.project_id, "ACTIVE")
    tracker.assign_project(manager, dev2.user_id, project.project_id, "ACTIVE")
    return {
        "tracker": tracker,
        "admin": admin,
        "manager": manager,
        "dev1": dev1,
        "dev2": dev2,
        "project": project,
    }


def make_draft(project, severity_id=1, **kwargs) -> BugDraft:
    defaults = dict(
        bug_name="Ledger rounding error",
        project_id=project.project_id,
        type_id=1,
        severity_id=severity_id,
        description="Totals off by one cent",
    )
    defaults.update(kwargs)
    return BugDraft(**defaults)


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class LiveServer:
    """`btrs serve` in a subprocess on an ephemeral port."""

    def __init__(self, data_dir, admin_password: str = ADMIN_PASSWORD):
        self.port = free_port()
        self.url = f"http://127.0.0.1:{self.port}"
        self.data_dir = data_dir
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "btrs", "serve",
             "--port", str(self.port), "--data-dir", str(data_dir),
             "--init-admin-password", admin_password],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        self.admin_token = self._wait_ready(admin_password)

    def _wait_ready(self, admin_password: str, timeout: float = 30.0) -> str:
        deadline = time.time() + timeout
        while time.time() < deadline:
            if self.proc.poll() is not None:
                raise RuntimeError(
                    "server exited: " + self.proc.stderr.read().decode())
            try:
                response = httpx.post(self.url + "/session",
                                      json={"username": "admin",
                                            "password": admin_password},
                                      timeout=2.0)
                if response.status_code == 200:
                    return response.json()["token"]
            except httpx.HTTPError:
                pass
            time.sleep(0.1)
        raise RuntimeError("server did not become ready in time")

    def stop(self) -> None:
        self.proc.terminate()
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
