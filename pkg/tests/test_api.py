import json

import pytest
from fastapi.testclient import TestClient

from evidence_engine.api import create_app
from evidence_engine.engine import dumps


@pytest.fixture(scope="module")
def client(mini_engine):
    return TestClient(create_app(mini_engine))


def test_health(client):
    resp = client.get("/v1/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_evidence_matches_engine_json(client, mini_engine):
    resp = client.get("/v1/evidence", params={"q": "diabetes, metformin", "k": 5})
    assert resp.status_code == 200
    assert resp.json() == json.loads(dumps(mini_engine.run("diabetes, metformin", 5)))
    assert list(resp.json()) == ["query", "expanded_query", "results"]


def test_k_limits_results(client):
    resp = client.get("/v1/evidence", params={"q": "diabetes", "k": 1})
    assert len(resp.json()["results"]) == 1


def test_no_evidence_is_null(client):
    data = client.get("/v1/evidence", params={"q": "insulin"}).json()
    assert {r["doc_id"] for r in data["results"]} == {"d02", "d10"}


@pytest.mark.parametrize("params,status", [
    ({"q": " , "}, 400),
    ({}, 422),
    ({"q": "diabetes", "k": 0}, 422),
])
def test_bad_requests(client, params, status):
    assert client.get("/v1/evidence", params=params).status_code == status
