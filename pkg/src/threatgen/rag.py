"""Context store: chunking, hashed bag-of-tokens embeddings, retrieval.

The embedder is deliberately dependency-free and deterministic: lowercase
the text, split on non-alphanumeric runs, hash every token occurrence
into one of ``D`` buckets with a stable 64-bit hash, then L2-normalize
the bucket counts.  Identical text embeds identically on every platform
and run, which keeps retrieval, prompts, and stored artifacts
reproducible.  Retrieval is an exact linear scan; no approximate index.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

__all__ = [
    "D",
    "DEFAULT_MAX_CHARS",
    "DEFAULT_OVERLAP",
    "KIND_WEIGHTS",
    "SourceDocument",
    "Chunk",
    "RetrievalResult",
    "VectorIndex",
    "RemoteEmbedder",
    "UnsupportedDocumentError",
    "EmbeddingError",
    "tokenize",
    "embed",
    "split_text",
    "chunk_document",
    "retrieve",
    "load_text_file",
    "default_weight",
]

#: Embedding dimension.
D = 256

DEFAULT_MAX_CHARS = 1200
DEFAULT_OVERLAP = 200

#: Default document weight by source kind; weights bias tie-breaking
#: toward more trustworthy sources.
KIND_WEIGHTS = {
    "previous-threat-model": 0.9,
    "design": 0.8,
    "requirements": 0.7,
    "sensor-log": 0.5,
    "other": 0.5,
}

_TOKEN = re.compile(r"[a-z0-9]+")
_TEXT_SUFFIXES = {".txt", ".md"}


class UnsupportedDocumentError(Exception):
    """Raised when a file is not a plain-text or Markdown document."""


class EmbeddingError(Exception):
    """Raised when a remote embedding backend fails or misbehaves."""


def default_weight(kind: str) -> float:
    try:
        return KIND_WEIGHTS[kind]
    except KeyError:
        raise ValueError(
            f"unknown document kind {kind!r}; expected one of {sorted(KIND_WEIGHTS)}"
        ) from None


@dataclass(frozen=True)
class SourceDocument:
    id: str
    kind: str
    title: str
    text: str
    weight: float


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    seq: int
    text: str
    vector: tuple[float, ...]


@dataclass(frozen=True)
class RetrievalResult:
    chunk: Chunk
    score: float


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def embed(text: str, dim: int = D) -> tuple[float, ...]:
    """Unit-norm hashed bag-of-tokens vector; all-zero for empty text."""
    counts = [0.0] * dim
    for token in tokenize(text):
        counts[_bucket(token, dim)] += 1.0
    norm = math.sqrt(math.fsum(c * c for c in counts))
    if norm == 0.0:
        return tuple(counts)
    return tuple(c / norm for c in counts)


def split_text(text: str, max_chars: int = DEFAULT_MAX_CHARS,
               overlap: int = DEFAULT_OVERLAP) -> list[str]:
    """Sliding-window split with exact ``overlap`` between neighbors.

    Windows are ``max_chars`` wide; when a window would cut mid-run, the
    boundary backs up to just after the last whitespace in the window,
    provided that still makes progress past the overlap.  The final chunk
    simply runs to the end of the text.  Concatenating the first chunk
    with every later chunk minus its first ``overlap`` characters
    reconstructs the input exactly.
    """
    if max_chars < 1:
        raise ValueError("max_chars must be positive")
    if overlap < 0 or overlap >= max_chars:
        raise ValueError("overlap must satisfy 0 <= overlap < max_chars")
    n = len(text)
    if n == 0:
        return []
    chunks: list[str] = []
    start = 0
    while True:
        end = start + max_chars
        if end >= n:
            chunks.append(text[start:])
            return chunks
        window = text[start:end]
        cut = None
        for i in range(len(window) - 1, -1, -1):
            if window[i].isspace():
                cut = i + 1  # keep the whitespace in this chunk
                break
        if cut is not None and cut > overlap:
            end = start + cut
        chunks.append(text[start:end])
        start = end - overlap


def chunk_document(doc: SourceDocument, max_chars: int = DEFAULT_MAX_CHARS,
                   overlap: int = DEFAULT_OVERLAP,
                   embedder: Callable[[str], tuple[float, ...]] = embed) -> list[Chunk]:
    return [
        Chunk(doc_id=doc.id, seq=seq, text=piece, vector=embedder(piece))
        for seq, piece in enumerate(split_text(doc.text, max_chars, overlap))
    ]


@dataclass
class RemoteEmbedder:
    """HTTP embedding backend, drop-in for the built-in :func:`embed`.

    Request body is ``{"input": [<texts>]}``; the reply must carry one
    vector per input under ``"vectors"``.  Vector dimension is whatever
    the remote model produces — callers size their index accordingly.
    """

    endpoint: str
    auth_token: str | None = None
    timeout: float = 60.0
    session: requests.Session = dataclasses.field(default_factory=requests.Session)

    def embed_many(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        try:
            response = self.session.post(
                self.endpoint,
                json={"input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EmbeddingError(f"embedding request failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise EmbeddingError(
                f"embedding endpoint returned status {response.status_code}"
            )
        try:
            vectors = response.json()["vectors"]
            out = [tuple(float(x) for x in vec) for vec in vectors]
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if len(out) != len(texts):
            raise EmbeddingError(
                f"expected {len(texts)} vectors, got {len(out)}"
            )
        return out

    def __call__(self, text: str) -> tuple[float, ...]:
        return self.embed_many([text])[0]


class VectorIndex:
    """Exact-scan vector index over chunks with per-document weights."""

    def __init__(self, dimension: int = D):
        self.dimension = dimension
        self._chunks: list[Chunk] = []
        self._weights: dict[str, float] = {}
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def chunks(self) -> tuple[Chunk, ...]:
        return tuple(self._chunks)

    def weight_of(self, doc_id: str) -> float:
        return self._weights[doc_id]

    def add_document(self, doc: SourceDocument,
                     max_chars: int = DEFAULT_MAX_CHARS,
                     overlap: int = DEFAULT_OVERLAP,
                     embedder: Callable[[str], tuple[float, ...]] = embed) -> list[Chunk]:
        chunks = chunk_document(doc, max_chars, overlap, embedder)
        self.add_chunks(chunks, weight=doc.weight)
        return chunks

    def add_chunks(self, chunks: list[Chunk], weight: float) -> None:
        seen = {(c.doc_id, c.seq) for c in self._chunks}
        for chunk in chunks:
            if len(chunk.vector) != self.dimension:
                raise ValueError(
                    f"chunk {(chunk.doc_id, chunk.seq)} has dimension "
                    f"{len(chunk.vector)}, index wants {self.dimension}"
                )
            if (chunk.doc_id, chunk.seq) in seen:
                raise ValueError(f"duplicate chunk {(chunk.doc_id, chunk.seq)}")
            seen.add((chunk.doc_id, chunk.seq))
            self._chunks.append(chunk)
            self._weights[chunk.doc_id] = weight
        self._matrix = None

    def _scores(self, query_vector: np.ndarray) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array([c.vector for c in self._chunks], dtype=np.float64)
        return self._matrix @ query_vector


def retrieve(index: VectorIndex, query: str, k: int,
             query_vector: Sequence[float] | None = None) -> list[RetrievalResult]:
    """Top-k chunks by cosine similarity.

    Stored vectors and the query are unit-norm, so the dot product is the
    cosine.  Ties break by document weight descending, then doc id, then
    chunk seq.  A query that embeds to the zero vector matches nothing.
    Pass ``query_vector`` to override the built-in query embedding, e.g.
    when the index was built with a remote embedder.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if len(index) == 0:
        return []
    if query_vector is None:
        query_vector = embed(query, index.dimension)
    query_vector = np.array(query_vector, dtype=np.float64)
    if not query_vector.any():
        return []
    scores = index._scores(query_vector)
    order = sorted(
        range(len(index.chunks)),
        key=lambda i: (
            -scores[i],
            -index.weight_of(index.chunks[i].doc_id),
            index.chunks[i].doc_id,
            index.chunks[i].seq,
        ),
    )
    return [
        RetrievalResult(chunk=index.chunks[i], score=float(scores[i]))
        for i in order[:k]
    ]


def load_text_file(path: str | Path) -> str:
    """Read a ``.txt`` or ``.md`` file; anything else is rejected."""
    p = Path(path)
    if p.suffix.lower() not in _TEXT_SUFFIXES:
        raise UnsupportedDocumentError(
            f"unsupported document type {p.suffix!r} for {p.name}; "
            "only .txt and .md are accepted"
        )
    return p.read_text(encoding="utf-8")
