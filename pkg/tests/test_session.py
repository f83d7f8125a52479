"""Session store: persistence layout, versioning, generation, transcript."""

from __future__ import annotations

import json
import re
import threading

import pytest

from threatgen.config import AppConfig
from threatgen.dfd import DfdSyntaxError, parse_dfd, serialize_dfd
from threatgen.generation import RemoteLlmError, generate_offline
from threatgen.otm import serialize_otm
from threatgen.rag import split_text
from threatgen.session import (
    DocumentAbsentError,
    NoDfdError,
    SessionNotFoundError,
    SessionStore,
    VersionNotFoundError,
)


class StubClient:
    """Duck-typed stand-in for the remote completion client."""

    def __init__(self, reply):
        self.reply = reply
        self.calls = []

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        self.calls.append((system_prompt, user_prompt))
        if isinstance(self.reply, Exception):
            raise self.reply
        return self.reply


@pytest.fixture()
def store(tmp_path):
    return SessionStore(AppConfig(data_root=str(tmp_path)))


def _remote_store(tmp_path, reply):
    client = StubClient(reply)
    config = AppConfig(data_root=str(tmp_path))
    return SessionStore(config, remote_client=client), client


# --- sessions ----------------------------------------------------------------


def test_create_returns_distinct_capability_ids(store):
    first, second = store.create_session("a"), store.create_session("b")
    assert first != second
    assert re.fullmatch(r"[0-9a-f]{32}", first)
    assert re.fullmatch(r"[0-9a-f]{32}", second)


def test_new_session_is_empty(store):
    session_id = store.create_session("fresh")
    rows = store.list_sessions()
    assert [r["id"] for r in rows] == [session_id]
    assert rows[0]["name"] == "fresh"
    assert rows[0]["versions"] == 0
    assert store.get_transcript(session_id) == []


def test_unknown_session_rejected(store):
    with pytest.raises(SessionNotFoundError):
        store.get_transcript("0" * 32)
    with pytest.raises(SessionNotFoundError):
        store.upload_dfd("../../etc", 'system "x"')


def test_survives_process_restart(tmp_path, chatbot_text):
    config = AppConfig(data_root=str(tmp_path))
    first = SessionStore(config)
    session_id = first.create_session("durable")
    first.upload_dfd(session_id, chatbot_text)

    reborn = SessionStore(config)
    rows = reborn.list_sessions()
    assert [r["id"] for r in rows] == [session_id]
    assert rows[0]["versions"] == 1
    assert reborn.get_qa(session_id, 1)["healthScore"] == 76
    assert reborn.get_model(session_id, 1)["project"]["name"] == "ChatBot"


def test_timestamps_come_from_the_clock(tmp_path):
    store = SessionStore(AppConfig(data_root=str(tmp_path)), clock=lambda: 1700000000.0)
    store.create_session("clocked")
    assert store.list_sessions()[0]["createdAt"] == "2023-11-14T22:13:20.000Z"


# --- DFD upload and auto-regeneration ---------------------------------------


def test_first_upload_regenerates(store, chatbot_text, chatbot_model):
    session_id = store.create_session("s")
    result = store.upload_dfd(session_id, chatbot_text)
    assert result == {"dfdVersion": 1, "modelVersion": 1}
    expected = json.loads(serialize_otm(generate_offline(chatbot_model).document))
    assert store.get_model(session_id, 1) == expected
    assert store.get_qa(session_id, 1)["healthScore"] == 76
    assert store.get_metrics(session_id, 1)["totalRisk"] == 288.0
    info = store.version_info(session_id, 1)
    assert info["backend"] == "offline"
    assert info["dfdVersion"] == 1
    assert info["hasDocument"] is True
    assert info["parseDiagnostics"] == []


def test_reupload_appends_and_diff_is_empty(store, chatbot_text, tmp_path):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    result = store.upload_dfd(session_id, chatbot_text)
    assert result == {"dfdVersion": 2, "modelVersion": 2}
    diff = store.get_diff(session_id, 1, 2)
    assert diff == {
        "addedThreats": [],
        "removedThreats": [],
        "changedThreats": [],
        "addedMitigations": [],
        "removedMitigations": [],
    }
    stored = json.loads(
        (tmp_path / "sessions" / session_id / "models" / "v2" / "diff.json").read_text()
    )
    assert stored == diff


def test_dfd_stored_canonically(store, chatbot_text, tmp_path):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    stored = (tmp_path / "sessions" / session_id / "dfd" / "v1.dfd").read_text()
    assert stored == serialize_dfd(parse_dfd(chatbot_text))


def test_malformed_upload_changes_nothing(store, chatbot_text, tmp_path):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    before = (tmp_path / "sessions" / session_id / "events.log").read_text()
    with pytest.raises(DfdSyntaxError):
        store.upload_dfd(session_id, 'system "x"\nflow f nowhere -> nowhere')
    after = (tmp_path / "sessions" / session_id / "events.log").read_text()
    assert after == before
    assert store.list_sessions()[0]["versions"] == 1


def test_auto_regenerate_can_be_disabled(tmp_path, chatbot_text):
    store = SessionStore(AppConfig(data_root=str(tmp_path), auto_regenerate=False))
    session_id = store.create_session("manual")
    result = store.upload_dfd(session_id, chatbot_text)
    assert result == {"dfdVersion": 1}
    with pytest.raises(VersionNotFoundError):
        store.get_qa(session_id, 1)
    assert store.generate(session_id) == {"modelVersion": 1}


# --- corpus ingestion --------------------------------------------------------


def test_ingest_assigns_sequential_ids(store):
    session_id = store.create_session("s")
    text = "alpha beta gamma " * 200
    first = store.ingest_document(session_id, "design", "Notes", text)
    second = store.ingest_document(session_id, "requirements", "Reqs", "short")
    assert first == {"docId": "d1", "chunks": len(split_text(text, 1200, 200))}
    assert second == {"docId": "d2", "chunks": 1}


def test_ingest_persists_document(store, tmp_path):
    session_id = store.create_session("s")
    store.ingest_document(session_id, "sensor-log", "Log", "a b c", weight=0.9)
    raw = json.loads(
        (tmp_path / "sessions" / session_id / "docs" / "d1.json").read_text()
    )
    assert raw == {
        "id": "d1",
        "kind": "sensor-log",
        "title": "Log",
        "text": "a b c",
        "weight": 0.9,
    }


def test_ingest_validates_kind_and_weight(store):
    session_id = store.create_session("s")
    with pytest.raises(ValueError, match="blog"):
        store.ingest_document(session_id, "blog", "T", "x")
    with pytest.raises(ValueError, match="positive"):
        store.ingest_document(session_id, "design", "T", "x", weight=0.0)


# --- generation --------------------------------------------------------------


def test_generate_requires_a_dfd(store):
    session_id = store.create_session("s")
    with pytest.raises(NoDfdError):
        store.generate(session_id, "anything")


def test_generate_offline_matches_auto_regeneration(store, chatbot_text):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    store.ingest_document(session_id, "design", "Notes", "injection guidance " * 50)
    result = store.generate(
        session_id, "focus on prompt injection", strategy="chain-of-thought", k=3
    )
    assert result == {"modelVersion": 2}
    assert store.get_model(session_id, 2) == store.get_model(session_id, 1)
    assert store.get_qa(session_id, 2) == store.get_qa(session_id, 1)


def test_generate_appends_one_transcript_pair(store, chatbot_text):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    store.generate(session_id, "tighten the history store")
    transcript = store.get_transcript(session_id)
    assert [(t["role"], t["text"]) for t in transcript] == [
        ("stakeholder", "tighten the history store"),
        ("system", "model version 2 generated (backend offline, health 76)"),
    ]


def test_generate_validates_arguments(store, chatbot_text):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    with pytest.raises(ValueError):
        store.generate(session_id, backend="quantum")
    with pytest.raises(ValueError):
        store.generate(session_id, strategy="vibes")
    with pytest.raises(ValueError):
        store.generate(session_id, k=-1)


def test_remote_document_verbatim_matches_offline(tmp_path, chatbot_text, chatbot_model):
    reply = serialize_otm(generate_offline(chatbot_model).document)
    store, client = _remote_store(tmp_path, reply)
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    result = store.generate(session_id, "please model this", backend="remote")
    assert result == {"modelVersion": 2}
    assert store.get_model(session_id, 2) == store.get_model(session_id, 1)
    assert store.get_qa(session_id, 2) == store.get_qa(session_id, 1)
    assert store.version_info(session_id, 2)["backend"] == "remote"
    assert len(client.calls) == 1


def test_remote_prose_wrapped_reply_is_extracted(tmp_path, chatbot_text, chatbot_model):
    document = serialize_otm(generate_offline(chatbot_model).document)
    reply = f"Sure! Here is the threat model:\n{document}\nLet me know."
    store, _ = _remote_store(tmp_path, reply)
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    store.generate(session_id, "go", backend="remote")
    assert store.get_model(session_id, 2) == store.get_model(session_id, 1)


def test_remote_garbage_reply_records_degraded_version(tmp_path, chatbot_text):
    store, _ = _remote_store(tmp_path, "I cannot help with that.")
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    result = store.generate(session_id, "go", backend="remote")
    assert result == {"modelVersion": 2}
    info = store.version_info(session_id, 2)
    assert info["hasDocument"] is False
    assert info["parseDiagnostics"] == ["no JSON object found in model reply"]
    assert store.get_qa(session_id, 2)["healthScore"] == 0
    with pytest.raises(DocumentAbsentError):
        store.get_model(session_id, 2)
    with pytest.raises(DocumentAbsentError):
        store.get_metrics(session_id, 2)
    with pytest.raises(DocumentAbsentError):
        store.get_diff(session_id, 1, 2)


def test_remote_failure_leaves_transcript_but_no_version(tmp_path, chatbot_text):
    store, _ = _remote_store(tmp_path, RemoteLlmError("all attempts failed"))
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    with pytest.raises(RemoteLlmError):
        store.generate(session_id, "go", backend="remote")
    assert store.list_sessions()[0]["versions"] == 1
    transcript = store.get_transcript(session_id)
    assert [(t["role"], t["text"]) for t in transcript] == [
        ("stakeholder", "go"),
        ("system", "remote generation failed: all attempts failed"),
    ]


def test_remote_unconfigured_is_an_error(store, chatbot_text):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    with pytest.raises(RemoteLlmError, match="not configured"):
        store.generate(session_id, "go", backend="remote")


# --- event log and concurrency -----------------------------------------------


def test_event_log_is_ordered_jsonl(store, chatbot_text, tmp_path):
    session_id = store.create_session("s")
    store.upload_dfd(session_id, chatbot_text)
    store.ingest_document(session_id, "design", "T", "text")
    store.generate(session_id, "prompt")
    lines = (
        (tmp_path / "sessions" / session_id / "events.log")
        .read_text()
        .splitlines()
    )
    events = [json.loads(line) for line in lines]
    assert [e["kind"] for e in events] == [
        "dfd-updated",
        "model-generated",
        "document-ingested",
        "prompt-refined",
        "model-generated",
        "prompt-refined",
    ]
    assert all(set(e) == {"kind", "payload", "timestamp"} for e in events)
    stamps = [e["timestamp"] for e in events]
    assert stamps == sorted(stamps)


def test_concurrent_uploads_serialize(store, chatbot_text):
    session_id = store.create_session("s")
    errors = []

    def worker():
        try:
            store.upload_dfd(session_id, chatbot_text)
        except Exception as exc:  # pragma: no cover - failure reporting
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert store.list_sessions()[0]["versions"] == 8
    # Every version readable, numbered 1..8 exactly once.
    for version in range(1, 9):
        assert store.get_qa(session_id, version)["healthScore"] == 76
    with pytest.raises(VersionNotFoundError):
        store.get_qa(session_id, 9)
