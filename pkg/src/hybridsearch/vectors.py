"""Embedding providers, an exact vector store and cosine top-k search.

Embeddings are plain 1-D ``float64`` numpy arrays. Vectors held in a
:class:`VectorStore` are unit-normalized, so cosine similarity against them
reduces to a dot product with the normalized query.
"""

from __future__ import annotations

import hashlib
import json
import os
import urllib.error
import urllib.request
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .analysis import DEFAULT_ANALYZER, AnalyzerConfig, canonical_synonym_tokens, tokenize
from .core import RankedList, ranked_from_array
from .errors import (
    DimMismatch,
    FormatVersionError,
    MalformedResponse,
    ProviderUnavailable,
    ZeroVector,
)

STORE_FORMAT_VERSION = 1
ZERO_NORM = 1e-12
UNIT_TOLERANCE = 1e-6


def normalize(vec: Any) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimMismatch(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("embedding contains non-finite values")
    norm = float(np.linalg.norm(v))
    if norm < ZERO_NORM:
        raise ZeroVector("vector norm below 1e-12")
    return v / norm


def cosine(a: Any, b: Any) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"{a.shape} vs {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na < ZERO_NORM or nb < ZERO_NORM:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


@runtime_checkable
class EmbeddingProvider(Protocol):
    dim: int
    deterministic: bool

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic bag-of-words hashing embedder for offline use and tests.

    Each token, plus the canonical form of any synonym phrase it belongs to,
    is hashed with a seeded BLAKE2b into one of ``dim`` buckets; one further
    bit of the digest picks the sign. Empty input maps to the first basis
    vector.
    """

    deterministic = True

    def __init__(self, dim: int = 64, analyzer: AnalyzerConfig = DEFAULT_ANALYZER, seed: int = 0):
        if dim < 2:
            raise ValueError("dim must be at least 2")
        self.dim = dim
        self.analyzer = analyzer
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self._bucket = lru_cache(maxsize=65536)(self._bucket_uncached)

    def _bucket_uncached(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        value = int.from_bytes(digest, "little")
        return value % self.dim, (1.0 if (value >> 63) & 1 else -1.0)

    def features(self, text: str) -> tuple[str, ...]:
        tokens = tokenize(text, self.analyzer)
        return tokens + canonical_synonym_tokens(tokens, self.analyzer)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in self.features(text):
            bucket, sign = self._bucket(token)
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm < ZERO_NORM:
            vec = np.zeros(self.dim)
            vec[0] = 1.0
            return vec
        return vec / norm

    def config(self) -> dict[str, Any]:
        return {"kind": "hashing", "dim": self.dim, "seed": self.seed}


def test_embedder_embed(text: str, dim: int, config: AnalyzerConfig = DEFAULT_ANALYZER) -> np.ndarray:
    return HashingEmbedder(dim, config).embed(text)


test_embedder_embed.__test__ = False  # not a pytest test despite the name


class RemoteEmbedder:
    """Client for an HTTP embedding endpoint.

    Protocol: ``POST {"input": text}`` answered by ``{"embedding": [floats]}``.
    """

    deterministic = False

    def __init__(self, endpoint: str, api_key: str | None = None, dim: int | None = None, timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.dim = dim
        self.timeout = timeout

    @classmethod
    def from_env(cls, dim: int | None = None, env: Mapping[str, str] | None = None) -> "RemoteEmbedder":
        env = os.environ if env is None else env
        endpoint = env.get("EMBED_ENDPOINT")
        if not endpoint:
            raise ProviderUnavailable("EMBED_ENDPOINT is not set")
        return cls(endpoint, env.get("EMBED_API_KEY"), dim=dim)

    def request(self, text: str) -> Any:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = json.dumps({"input": text}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderUnavailable(f"embedding request failed: {exc}") from exc
        try:
            return json.loads(payload)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedResponse(f"embedding response is not JSON: {exc}") from exc

    def embed(self, text: str) -> np.ndarray:
        return remote_embed(self, text)

    def config(self) -> dict[str, Any]:
        return {"kind": "remote", "dim": self.dim}


def remote_embed(client: RemoteEmbedder, text: str, dim: int | None = None) -> np.ndarray:
    """Fetch an embedding from ``client`` and L2-normalize it locally."""
    payload = client.request(text)
    if not isinstance(payload, dict) or not isinstance(payload.get("embedding"), list):
        raise MalformedResponse("response lacks an 'embedding' array")
    raw = payload["embedding"]
    if not raw or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw):
        raise MalformedResponse("embedding must be a non-empty array of numbers")
    expected = dim if dim is not None else client.dim
    if expected is not None and len(raw) != expected:
        raise DimMismatch(f"provider returned dim {len(raw)}, expected {expected}")
    try:
        return normalize(raw)
    except (ValueError, ZeroVector) as exc:
        raise MalformedResponse(str(exc)) from exc


class VectorStore:
    """Immutable doc_id -> unit vector map, scanned exhaustively at query time."""

    def __init__(self, doc_ids: Sequence[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(doc_ids):
            raise DimMismatch(f"matrix shape {matrix.shape} does not match {len(doc_ids)} ids")
        if len(set(doc_ids)) != len(doc_ids):
            raise ValueError("duplicate doc_id in vector store")
        order = sorted(range(len(doc_ids)), key=lambda i: doc_ids[i])
        self.doc_ids: tuple[str, ...] = tuple(doc_ids[i] for i in order)
        self.matrix = np.ascontiguousarray(matrix[order])
        if len(self.doc_ids):
            norms = np.linalg.norm(self.matrix, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
                raise ValueError("stored vectors must be L2-normalized")
        self.matrix.flags.writeable = False

    @classmethod
    def from_embeddings(cls, entries: Mapping[str, Any], dim: int) -> "VectorStore":
        ids = list(entries)
        matrix = np.zeros((len(ids), dim))
        for row, doc_id in enumerate(ids):
            vec = np.asarray(entries[doc_id], dtype=np.float64)
            if vec.shape != (dim,):
                raise DimMismatch(f"{doc_id}: dim {vec.shape} != {dim}")
            matrix[row] = normalize(vec)
        return cls(ids, matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.doc_ids)

    def get(self, doc_id: str) -> np.ndarray:
        return self.matrix[self.doc_ids.index(doc_id)]


def search_vector(store: VectorStore, query_vec: Any, k: int | None = 10) -> RankedList:
    """Exact cosine top-k; scores are remapped to ``(cos + 1) / 2`` so they lie in [0, 1]."""
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (store.dim,):
        raise DimMismatch(f"query dim {q.shape} != store dim {store.dim}")
    q = normalize(q)
    if not len(store):
        return RankedList((), "semantic")
    sims = np.clip(store.matrix @ q, -1.0, 1.0)
    scores = (sims + 1.0) / 2.0
    return ranked_from_array(store.doc_ids, scores, np.arange(len(store)), "semantic", k)


def save_store(store: VectorStore, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"version": STORE_FORMAT_VERSION, "dim": store.dim, "doc_ids": list(store.doc_ids)}
    (directory / "vectors.json").write_text(json.dumps(meta, ensure_ascii=False), encoding="utf-8")
    np.save(directory / "vectors.npy", np.asarray(store.matrix), allow_pickle=False)


def load_store(directory: str | Path) -> VectorStore:
    directory = Path(directory)
    meta = json.loads((directory / "vectors.json").read_text(encoding="utf-8"))
    if meta.get("version") != STORE_FORMAT_VERSION:
        raise FormatVersionError(f"vectors.json: unsupported version {meta.get('version')!r}")
    matrix = np.load(directory / "vectors.npy", allow_pickle=False)
    if matrix.shape != (len(meta["doc_ids"]), meta["dim"]):
        raise FormatVersionError("vectors.npy shape disagrees with vectors.json")
    return VectorStore(meta["doc_ids"], matrix)
