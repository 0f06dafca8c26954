import pytest
from fastapi.testclient import TestClient

from app.config.scenario_file import dump_scenario
from app.main import app
from app.scheduler.job_manager import job_manager
from app.storage.storage_manager import StorageManager


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(job_manager, "storage", StorageManager(str(tmp_path)))
    monkeypatch.setattr(job_manager, "execute", lambda job_id, cfg: None)
    return TestClient(app)


def test_health(client):
    assert client.get("/health").json() == {"status": "healthy"}
    assert "message" in client.get("/").json()


def test_presets(client):
    body = client.get("/api/controllers/presets", params={"N": 4}).json()
    assert body["N"] == 4
    by_name = {b["name"]: b for b in body["behaviors"]}
    assert set(by_name) == {"gfl", "gfm", "pq", "pv", "qv_droop"}
    assert by_name["gfm"]["couples_frequency"] is True
    assert by_name["gfl"]["couples_frequency"] is False
    assert [w["preset"] for w in body["integral"]] == ["full", "power_voltage"]


def test_presets_reject_bad_horizon(client):
    assert client.get("/api/controllers/presets", params={"N": 0}).status_code == 422


def test_invalid_scenario_upload(client):
    response = client.post("/api/scenarios/run",
                           files={"file": ("bad.cfg", b"[nowhere]\n", "text/plain")})
    assert response.status_code == 400
    assert "line 1" in response.json()["detail"]


def test_non_utf8_upload(client):
    response = client.post("/api/scenarios/run",
                           files={"file": ("bad.cfg", b"\xff\xfe\x00", "text/plain")})
    assert response.status_code == 400


def test_submit_and_query_job(client, baseline_cfg):
    response = client.post("/api/scenarios/run",
                           files={"file": ("ok.cfg", dump_scenario(baseline_cfg).encode(), "text/plain")})
    assert response.status_code == 202
    job_id = response.json()["job_id"]
    job = client.get(f"/api/scenarios/jobs/{job_id}").json()
    assert job["scenario_name"] == "baseline_short"
    assert client.get(f"/api/scenarios/jobs/{job_id}/metrics").status_code == 404
    assert job_id in [j["job_id"] for j in client.get("/api/scenarios/jobs").json()["jobs"]]


def test_unknown_job(client):
    assert client.get("/api/scenarios/jobs/nope").status_code == 404
    assert client.get("/api/scenarios/jobs/nope/metrics").status_code == 404
