"""HTTP JSON API over the session store.

Every error leaves the wire as ``{"error": {"code", "message"}}`` with a
matching status, so clients switch on the code and can show the message
verbatim.  CORS is wide open: the web client is served separately and
session ids are the only capability.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from threatgen.config import AppConfig
from threatgen.dfd import DfdSemanticError, DfdSyntaxError
from threatgen.generation import BudgetTooSmallError, RemoteLlmError
from threatgen.rag import EmbeddingError
from threatgen.session import (
    DocumentAbsentError,
    NoDfdError,
    SessionNotFoundError,
    SessionStore,
    StorageError,
    VersionNotFoundError,
)

__all__ = ["create_app"]

_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (SessionNotFoundError, 404, "session-not-found"),
    (VersionNotFoundError, 404, "model-version-not-found"),
    (DocumentAbsentError, 404, "model-document-absent"),
    (NoDfdError, 409, "no-dfd"),
    (DfdSyntaxError, 400, "dfd-syntax-error"),
    (DfdSemanticError, 400, "dfd-semantic-error"),
    (BudgetTooSmallError, 400, "invalid-request"),
    (ValueError, 400, "invalid-request"),
    (RemoteLlmError, 502, "remote-llm-error"),
    (EmbeddingError, 502, "remote-llm-error"),
    (StorageError, 500, "storage-error"),
]


class CreateSessionBody(BaseModel):
    name: str = ""


class DfdBody(BaseModel):
    text: str


class DocumentBody(BaseModel):
    kind: str
    title: str
    text: str
    weight: float | None = None


class GenerateBody(BaseModel):
    prompt: str = ""
    strategy: str = "direct"
    backend: str = "offline"
    k: int = 5


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def create_app(
    config: AppConfig | None = None, store: SessionStore | None = None
) -> FastAPI:
    """Build the application; pass a store to share state with tests."""
    if store is None:
        store = SessionStore(config if config is not None else AppConfig())

    app = FastAPI(title="threatgen", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    for exc_type, status, code in _ERROR_MAP:

        def handler(
            request: Request,
            exc: Exception,
            status: int = status,
            code: str = code,
        ) -> JSONResponse:
            return _error(status, code, str(exc))

        app.add_exception_handler(exc_type, handler)

    @app.exception_handler(RequestValidationError)
    def bad_body(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error(400, "invalid-request", str(exc))

    @app.get("/api/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        return {"id": store.create_session(body.name)}

    @app.get("/api/sessions")
    def list_sessions() -> list[dict]:
        return store.list_sessions()

    @app.post("/api/sessions/{session_id}/dfd")
    def upload_dfd(session_id: str, body: DfdBody) -> dict:
        return store.upload_dfd(session_id, body.text)

    @app.post("/api/sessions/{session_id}/documents", status_code=201)
    def ingest_document(session_id: str, body: DocumentBody) -> dict:
        return store.ingest_document(
            session_id, body.kind, body.title, body.text, body.weight
        )

    @app.post("/api/sessions/{session_id}/generate", status_code=201)
    def generate(session_id: str, body: GenerateBody) -> dict:
        return store.generate(
            session_id, body.prompt, body.strategy, body.backend, body.k
        )

    @app.get("/api/sessions/{session_id}/model/{version}")
    def get_model(session_id: str, version: int) -> dict:
        return store.get_model(session_id, version)

    @app.get("/api/sessions/{session_id}/model/{version}/qa")
    def get_qa(session_id: str, version: int) -> dict:
        return store.get_qa(session_id, version)

    @app.get("/api/sessions/{session_id}/model/{version}/metrics")
    def get_metrics(session_id: str, version: int) -> dict:
        return store.get_metrics(session_id, version)

    @app.get("/api/sessions/{session_id}/diff/{v1}/{v2}")
    def get_diff(session_id: str, v1: int, v2: int) -> dict:
        return store.get_diff(session_id, v1, v2)

    @app.get("/api/sessions/{session_id}/transcript")
    def get_transcript(session_id: str) -> list[dict]:
        return store.get_transcript(session_id)

    return app
