"""HTTP API: routes, status codes, and the error envelope."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from threatgen.config import AppConfig
from threatgen.generation import RemoteLlmError, generate_offline
from threatgen.otm import serialize_otm
from threatgen.session import SessionStore


class StubClient:
    def __init__(self, reply):
        self.reply = reply

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        if isinstance(self.reply, Exception):
            raise self.reply
        return self.reply


def _app(store):
    from threatgen.service import create_app

    return create_app(store=store)


@pytest.fixture()
def client(tmp_path):
    store = SessionStore(AppConfig(data_root=str(tmp_path)))
    with TestClient(_app(store)) as c:
        yield c


def _session(client) -> str:
    response = client.post("/api/sessions", json={"name": "t"})
    assert response.status_code == 201
    return response.json()["id"]


def _upload(client, session_id, chatbot_text) -> dict:
    response = client.post(
        f"/api/sessions/{session_id}/dfd", json={"text": chatbot_text}
    )
    assert response.status_code == 200
    return response.json()


# --- happy path ---------------------------------------------------------------


def test_healthz(client):
    response = client.get("/api/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_session_lifecycle(client, chatbot_text):
    session_id = _session(client)
    rows = client.get("/api/sessions").json()
    assert [row["id"] for row in rows] == [session_id]
    assert rows[0]["versions"] == 0

    assert _upload(client, session_id, chatbot_text) == {
        "dfdVersion": 1,
        "modelVersion": 1,
    }
    assert client.get("/api/sessions").json()[0]["versions"] == 1


def test_model_qa_metrics_roundtrip(client, chatbot_text, chatbot_model):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)

    model = client.get(f"/api/sessions/{session_id}/model/1")
    assert model.status_code == 200
    expected = json.loads(serialize_otm(generate_offline(chatbot_model).document))
    assert model.json() == expected

    qa = client.get(f"/api/sessions/{session_id}/model/1/qa")
    assert qa.status_code == 200
    assert qa.json()["healthScore"] == 76

    metrics = client.get(f"/api/sessions/{session_id}/model/1/metrics")
    assert metrics.status_code == 200
    assert metrics.json()["totalRisk"] == 288.0


def test_reupload_diff_is_empty(client, chatbot_text):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)
    _upload(client, session_id, chatbot_text)
    diff = client.get(f"/api/sessions/{session_id}/diff/1/2")
    assert diff.status_code == 200
    assert diff.json() == {
        "addedThreats": [],
        "removedThreats": [],
        "changedThreats": [],
        "addedMitigations": [],
        "removedMitigations": [],
    }


def test_document_ingest_and_generate(client, chatbot_text):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)

    doc = client.post(
        f"/api/sessions/{session_id}/documents",
        json={"kind": "design", "title": "Notes", "text": "retrieval context"},
    )
    assert doc.status_code == 201
    assert doc.json() == {"docId": "d1", "chunks": 1}

    gen = client.post(
        f"/api/sessions/{session_id}/generate",
        json={"prompt": "harden the gateway", "k": 2},
    )
    assert gen.status_code == 201
    assert gen.json() == {"modelVersion": 2}

    transcript = client.get(f"/api/sessions/{session_id}/transcript")
    assert transcript.status_code == 200
    pairs = [(t["role"], t["text"]) for t in transcript.json()]
    assert pairs == [
        ("stakeholder", "harden the gateway"),
        ("system", "model version 2 generated (backend offline, health 76)"),
    ]


def test_generate_defaults_need_no_body_fields(client, chatbot_text):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)
    response = client.post(f"/api/sessions/{session_id}/generate", json={})
    assert response.status_code == 201
    assert response.json() == {"modelVersion": 2}


def test_auto_regenerate_off_omits_model_version(tmp_path, chatbot_text):
    store = SessionStore(AppConfig(data_root=str(tmp_path), auto_regenerate=False))
    with TestClient(_app(store)) as client:
        session_id = _session(client)
        assert _upload(client, session_id, chatbot_text) == {"dfdVersion": 1}


def test_cors_allows_any_origin(client):
    response = client.get("/api/healthz", headers={"Origin": "http://elsewhere"})
    assert response.headers["access-control-allow-origin"] == "*"


# --- error envelope -----------------------------------------------------------


def _expect_error(response, status: int, code: str) -> None:
    assert response.status_code == status
    body = response.json()
    assert set(body) == {"error"}
    assert set(body["error"]) == {"code", "message"}
    assert body["error"]["code"] == code
    assert body["error"]["message"]


def test_unknown_session_404(client):
    _expect_error(
        client.get(f"/api/sessions/{'0' * 32}/transcript"), 404, "session-not-found"
    )


def test_unknown_version_404(client, chatbot_text):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)
    _expect_error(
        client.get(f"/api/sessions/{session_id}/model/7"),
        404,
        "model-version-not-found",
    )


def test_generate_without_dfd_409(client):
    session_id = _session(client)
    _expect_error(
        client.post(f"/api/sessions/{session_id}/generate", json={}), 409, "no-dfd"
    )


def test_bad_dfd_text_400(client):
    session_id = _session(client)
    _expect_error(
        client.post(f"/api/sessions/{session_id}/dfd", json={"text": "flow ???"}),
        400,
        "dfd-syntax-error",
    )
    _expect_error(
        client.post(
            f"/api/sessions/{session_id}/dfd",
            json={"text": 'system "x"\nprocess p "P"\nflow f p -> ghost : "x"'},
        ),
        400,
        "dfd-semantic-error",
    )


def test_bad_document_kind_400(client):
    session_id = _session(client)
    _expect_error(
        client.post(
            f"/api/sessions/{session_id}/documents",
            json={"kind": "blog", "title": "T", "text": "x"},
        ),
        400,
        "invalid-request",
    )


def test_malformed_body_400(client):
    session_id = _session(client)
    _expect_error(
        client.post(f"/api/sessions/{session_id}/dfd", json={"wrong": 1}),
        400,
        "invalid-request",
    )


def test_remote_not_configured_502(client, chatbot_text):
    session_id = _session(client)
    _upload(client, session_id, chatbot_text)
    _expect_error(
        client.post(
            f"/api/sessions/{session_id}/generate", json={"backend": "remote"}
        ),
        502,
        "remote-llm-error",
    )


def test_remote_stub_roundtrip(tmp_path, chatbot_text, chatbot_model):
    reply = serialize_otm(generate_offline(chatbot_model).document)
    store = SessionStore(
        AppConfig(data_root=str(tmp_path)), remote_client=StubClient(reply)
    )
    with TestClient(_app(store)) as client:
        session_id = _session(client)
        _upload(client, session_id, chatbot_text)
        response = client.post(
            f"/api/sessions/{session_id}/generate",
            json={"backend": "remote", "prompt": "model it"},
        )
        assert response.status_code == 201
        assert response.json() == {"modelVersion": 2}
        assert (
            client.get(f"/api/sessions/{session_id}/model/2").json()
            == client.get(f"/api/sessions/{session_id}/model/1").json()
        )


def test_remote_failure_502_after_transcript(tmp_path, chatbot_text):
    store = SessionStore(
        AppConfig(data_root=str(tmp_path)),
        remote_client=StubClient(RemoteLlmError("upstream down")),
    )
    with TestClient(_app(store)) as client:
        session_id = _session(client)
        _upload(client, session_id, chatbot_text)
        _expect_error(
            client.post(
                f"/api/sessions/{session_id}/generate", json={"backend": "remote"}
            ),
            502,
            "remote-llm-error",
        )
        roles = [t["role"] for t in client.get(
            f"/api/sessions/{session_id}/transcript"
        ).json()]
        assert roles == ["stakeholder", "system"]


def test_degraded_remote_version_then_document_absent_404(tmp_path, chatbot_text):
    store = SessionStore(
        AppConfig(data_root=str(tmp_path)),
        remote_client=StubClient("not a document at all"),
    )
    with TestClient(_app(store)) as client:
        session_id = _session(client)
        _upload(client, session_id, chatbot_text)
        response = client.post(
            f"/api/sessions/{session_id}/generate", json={"backend": "remote"}
        )
        assert response.status_code == 201
        assert response.json() == {"modelVersion": 2}
        assert client.get(
            f"/api/sessions/{session_id}/model/2/qa"
        ).json()["healthScore"] == 0
        _expect_error(
            client.get(f"/api/sessions/{session_id}/model/2"),
            404,
            "model-document-absent",
        )
