"""Durable threat-modeling sessions: versions, corpus, transcript.

Each session lives in its own directory under ``<data_root>/sessions/``:

    meta.json            name + creation time
    events.log           append-only JSONL, the source of truth for order
    dfd/v<N>.dfd         canonical DFD text per uploaded version
    docs/<docId>.json    ingested corpus documents
    models/v<N>/         one generated model version:
        info.json        backend, source dfd version, diagnostics, health
        document.otm.json (absent when the backend reply had no document)
        qa.json, metrics.json, diff.json, raw.txt

Writes happen files-first: the event line in ``events.log`` is the
commit point, so a crash mid-write leaves orphan files that the next
writer overwrites, never a half-visible version.  Version numbers are
derived by counting committed events.  All mutating operations on one
session serialize on a per-session lock; distinct sessions never
contend.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from threatgen.catalog import ThreatCatalog, builtin_catalog
from threatgen.config import AppConfig
from threatgen.dfd import DfdModel, parse_dfd, serialize_dfd
from threatgen.generation import (
    GenerationResult,
    ReasoningStrategy,
    RemoteLlmClient,
    RemoteLlmError,
    build_prompt,
    generate_offline,
    generate_remote,
)
from threatgen.metrics import compute_metrics, metrics_to_dict
from threatgen.otm import diff_otm, diff_to_dict, parse_otm, serialize_otm
from threatgen.qa import report_to_dict, run_qa, select_tests
from threatgen.rag import (
    RemoteEmbedder,
    SourceDocument,
    VectorIndex,
    chunk_document,
    default_weight,
    embed,
    retrieve,
)

__all__ = [
    "SessionError",
    "SessionNotFoundError",
    "VersionNotFoundError",
    "DocumentAbsentError",
    "NoDfdError",
    "StorageError",
    "SessionStore",
]

_SESSION_ID = re.compile(r"[0-9a-f]{32}")

BACKENDS = ("offline", "remote")


class SessionError(Exception):
    """Base class for session-store failures."""


class SessionNotFoundError(SessionError):
    pass


class VersionNotFoundError(SessionError):
    pass


class DocumentAbsentError(SessionError):
    """The version exists but its backend reply contained no document."""


class NoDfdError(SessionError):
    """Generation requested before any DFD was uploaded."""


class StorageError(SessionError):
    pass


def _iso(stamp: float) -> str:
    moment = datetime.fromtimestamp(stamp, tz=timezone.utc)
    return moment.isoformat(timespec="milliseconds").replace("+00:00", "Z")


class SessionStore:
    """File-backed store; safe for concurrent use within one process."""

    def __init__(
        self,
        config: AppConfig | None = None,
        *,
        catalog: ThreatCatalog | None = None,
        remote_client: object | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.config = config if config is not None else AppConfig()
        self.catalog = catalog if catalog is not None else builtin_catalog()
        self._remote_client = remote_client
        self._clock = clock
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        if self.config.embed_endpoint:
            self._embedder: Callable[[str], tuple[float, ...]] = RemoteEmbedder(
                self.config.embed_endpoint, self.config.llm_auth_token
            )
        else:
            self._embedder = embed

    # -- plumbing -------------------------------------------------------

    @property
    def sessions_root(self) -> Path:
        return Path(self.config.data_root) / "sessions"

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _dir(self, session_id: str) -> Path:
        path = self.sessions_root / session_id
        if not _SESSION_ID.fullmatch(session_id) or not (path / "meta.json").is_file():
            raise SessionNotFoundError(f"session {session_id!r} not found")
        return path

    def _now(self) -> str:
        return _iso(self._clock())

    @staticmethod
    def _write(path: Path, text: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc

    @staticmethod
    def _write_json(path: Path, payload: object) -> None:
        SessionStore._write(
            path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
        )

    @staticmethod
    def _read_json(path: Path) -> dict:
        return json.loads(path.read_text(encoding="utf-8"))

    def _events(self, session_id: str) -> list[dict]:
        log = self._dir(session_id) / "events.log"
        if not log.is_file():
            return []
        events = []
        for line in log.read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(json.loads(line))
        return events

    def _append_event(self, session_id: str, kind: str, payload: dict) -> None:
        record = {"kind": kind, "payload": payload, "timestamp": self._now()}
        line = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
        log = self.sessions_root / session_id / "events.log"
        try:
            with log.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to {log}: {exc}") from exc

    @staticmethod
    def _count(events: Iterable[dict], kind: str) -> int:
        return sum(1 for e in events if e["kind"] == kind)

    # -- sessions -------------------------------------------------------

    def create_session(self, name: str = "") -> str:
        session_id = secrets.token_hex(16)
        path = self.sessions_root / session_id
        try:
            path.mkdir(parents=True, exist_ok=False)
        except OSError as exc:
            raise StorageError(f"cannot create session directory: {exc}") from exc
        self._write_json(
            path / "meta.json",
            {"id": session_id, "name": name, "createdAt": self._now()},
        )
        self._write(path / "events.log", "")
        return session_id

    def list_sessions(self) -> list[dict]:
        if not self.sessions_root.is_dir():
            return []
        rows = []
        for child in self.sessions_root.iterdir():
            meta_path = child / "meta.json"
            if not meta_path.is_file():
                continue
            meta = self._read_json(meta_path)
            events = self._events(child.name)
            rows.append(
                {
                    "id": meta["id"],
                    "name": meta["name"],
                    "createdAt": meta["createdAt"],
                    "versions": self._count(events, "model-generated"),
                }
            )
        rows.sort(key=lambda r: (r["createdAt"], r["id"]))
        return rows

    # -- DFD versions ---------------------------------------------------

    def upload_dfd(self, session_id: str, text: str) -> dict:
        with self._lock(session_id):
            path = self._dir(session_id)
            model = parse_dfd(text)  # raises before any state changes
            dfd_version = self._count(self._events(session_id), "dfd-updated") + 1
            self._write(path / "dfd" / f"v{dfd_version}.dfd", serialize_dfd(model))
            self._append_event(session_id, "dfd-updated", {"dfdVersion": dfd_version})
            result: dict = {"dfdVersion": dfd_version}
            if self.config.auto_regenerate:
                generated = generate_offline(model, self.catalog)
                result["modelVersion"] = self._commit_model_version(
                    session_id, model, dfd_version, generated
                )[0]
            return result

    def _latest_dfd(self, session_id: str) -> tuple[int, DfdModel]:
        version = self._count(self._events(session_id), "dfd-updated")
        if version == 0:
            raise NoDfdError("session has no DFD yet; upload one first")
        text = (self._dir(session_id) / "dfd" / f"v{version}.dfd").read_text(
            encoding="utf-8"
        )
        return version, parse_dfd(text)

    # -- corpus ---------------------------------------------------------

    def ingest_document(
        self,
        session_id: str,
        kind: str,
        title: str,
        text: str,
        weight: float | None = None,
    ) -> dict:
        with self._lock(session_id):
            path = self._dir(session_id)
            base_weight = default_weight(kind)  # rejects unknown kinds
            final_weight = base_weight if weight is None else float(weight)
            if final_weight <= 0:
                raise ValueError("weight must be positive")
            doc_id = f"d{self._count(self._events(session_id), 'document-ingested') + 1}"
            document = SourceDocument(
                id=doc_id, kind=kind, title=title, text=text, weight=final_weight
            )
            chunks = chunk_document(document, embedder=self._embedder)
            self._write_json(
                path / "docs" / f"{doc_id}.json",
                {
                    "id": doc_id,
                    "kind": kind,
                    "title": title,
                    "text": text,
                    "weight": final_weight,
                },
            )
            self._append_event(
                session_id,
                "document-ingested",
                {"docId": doc_id, "chunks": len(chunks)},
            )
            return {"docId": doc_id, "chunks": len(chunks)}

    def _corpus_index(self, session_id: str) -> VectorIndex | None:
        path = self._dir(session_id)
        doc_ids = [
            e["payload"]["docId"]
            for e in self._events(session_id)
            if e["kind"] == "document-ingested"
        ]
        per_doc: list[tuple[list, float]] = []
        for doc_id in doc_ids:
            raw = self._read_json(path / "docs" / f"{doc_id}.json")
            document = SourceDocument(
                id=raw["id"],
                kind=raw["kind"],
                title=raw["title"],
                text=raw["text"],
                weight=raw["weight"],
            )
            chunks = chunk_document(document, embedder=self._embedder)
            if chunks:
                per_doc.append((chunks, document.weight))
        if not per_doc:
            return None
        index = VectorIndex(dimension=len(per_doc[0][0][0].vector))
        for chunks, weight in per_doc:
            index.add_chunks(chunks, weight=weight)
        return index

    # -- generation -----------------------------------------------------

    def generate(
        self,
        session_id: str,
        prompt: str = "",
        strategy: str = "direct",
        backend: str = "offline",
        k: int = 5,
    ) -> dict:
        with self._lock(session_id):
            self._dir(session_id)
            if backend not in BACKENDS:
                raise ValueError(f"unknown backend {backend!r}")
            reasoning = ReasoningStrategy(strategy)  # ValueError on unknown
            if k < 0:
                raise ValueError("k must be non-negative")
            dfd_version, model = self._latest_dfd(session_id)

            retrieved = ()
            if k > 0:
                index = self._corpus_index(session_id)
                if index is not None:
                    query_vector = None
                    if self._embedder is not embed:
                        query_vector = self._embedder(prompt)
                    retrieved = retrieve(index, prompt, k, query_vector=query_vector)
            bundle = build_prompt(
                model,
                prompt,
                reasoning,
                retrieved,
                self.config.token_budget,
                self.catalog,
            )

            if backend == "offline":
                result = generate_offline(model, self.catalog)
            else:
                client = self._client()
                try:
                    result = generate_remote(bundle, client)
                except RemoteLlmError as exc:
                    self._say(session_id, "stakeholder", prompt)
                    self._say(session_id, "system", f"remote generation failed: {exc}")
                    raise
            self._say(session_id, "stakeholder", prompt)
            version, health = self._commit_model_version(
                session_id, model, dfd_version, result
            )
            self._say(
                session_id,
                "system",
                f"model version {version} generated "
                f"(backend {backend}, health {health})",
            )
            return {"modelVersion": version}

    def _client(self):
        if self._remote_client is not None:
            return self._remote_client
        if not self.config.llm_endpoint:
            raise RemoteLlmError("remote backend is not configured")
        return RemoteLlmClient(
            endpoint=self.config.llm_endpoint,
            model=self.config.llm_model,
            auth_token=self.config.llm_auth_token,
        )

    def _say(self, session_id: str, role: str, text: str) -> None:
        self._append_event(session_id, "prompt-refined", {"role": role, "text": text})

    def _commit_model_version(
        self,
        session_id: str,
        model: DfdModel,
        dfd_version: int,
        result: GenerationResult,
    ) -> tuple[int, int]:
        path = self._dir(session_id)
        version = self._count(self._events(session_id), "model-generated") + 1
        vdir = path / "models" / f"v{version}"

        instances = select_tests(model, "all", catalog=self.catalog)
        subject = result.document if result.document is not None else result.raw_text
        qa_report = run_qa(subject, model, instances, catalog=self.catalog)
        self._write(vdir / "raw.txt", result.raw_text)
        self._write_json(vdir / "qa.json", report_to_dict(qa_report))
        if result.document is not None:
            self._write(vdir / "document.otm.json", serialize_otm(result.document))
            metrics = compute_metrics(result.document, model, catalog=self.catalog)
            self._write_json(vdir / "metrics.json", metrics_to_dict(metrics))
            if version > 1:
                previous = self._document_or_none(session_id, version - 1)
                if previous is not None:
                    diff = diff_otm(previous, result.document)
                    self._write_json(vdir / "diff.json", diff_to_dict(diff))
        self._write_json(
            vdir / "info.json",
            {
                "version": version,
                "dfdVersion": dfd_version,
                "backend": result.backend,
                "elapsedMillis": result.elapsed_millis,
                "parseDiagnostics": list(result.parse_diagnostics),
                "hasDocument": result.document is not None,
                "healthScore": qa_report.health_score,
                "createdAt": self._now(),
            },
        )
        self._append_event(
            session_id,
            "model-generated",
            {
                "modelVersion": version,
                "dfdVersion": dfd_version,
                "backend": result.backend,
            },
        )
        return version, qa_report.health_score

    # -- reads ----------------------------------------------------------

    def _version_dir(self, session_id: str, version: int) -> Path:
        path = self._dir(session_id)
        committed = self._count(self._events(session_id), "model-generated")
        if not 1 <= version <= committed:
            raise VersionNotFoundError(f"model version {version} not found")
        return path / "models" / f"v{version}"

    def _document_or_none(self, session_id: str, version: int):
        vdir = self._version_dir(session_id, version)
        doc_path = vdir / "document.otm.json"
        if not doc_path.is_file():
            return None
        return parse_otm(doc_path.read_text(encoding="utf-8"))

    def version_info(self, session_id: str, version: int) -> dict:
        return self._read_json(self._version_dir(session_id, version) / "info.json")

    def get_model(self, session_id: str, version: int) -> dict:
        vdir = self._version_dir(session_id, version)
        doc_path = vdir / "document.otm.json"
        if not doc_path.is_file():
            raise DocumentAbsentError(
                f"model version {version} has no document "
                "(the backend reply did not parse)"
            )
        return json.loads(doc_path.read_text(encoding="utf-8"))

    def get_qa(self, session_id: str, version: int) -> dict:
        return self._read_json(self._version_dir(session_id, version) / "qa.json")

    def get_metrics(self, session_id: str, version: int) -> dict:
        vdir = self._version_dir(session_id, version)
        metrics_path = vdir / "metrics.json"
        if not metrics_path.is_file():
            raise DocumentAbsentError(
                f"model version {version} has no document, so no metrics"
            )
        return self._read_json(metrics_path)

    def get_diff(self, session_id: str, v1: int, v2: int) -> dict:
        old = self._document_or_none(session_id, v1)
        new = self._document_or_none(session_id, v2)
        if old is None or new is None:
            absent = v1 if old is None else v2
            raise DocumentAbsentError(f"model version {absent} has no document")
        return diff_to_dict(diff_otm(old, new))

    def get_transcript(self, session_id: str) -> list[dict]:
        return [
            {
                "role": e["payload"]["role"],
                "text": e["payload"]["text"],
                "timestamp": e["timestamp"],
            }
            for e in self._events(session_id)
            if e["kind"] == "prompt-refined"
        ]
