"""Engine state, ingestion, persistence and mode-dependent hybrid search."""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
import shutil
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .analysis import AnalyzerConfig
from .core import (
    Document,
    RankedList,
    check_ranked_list,
    ensure_unique_ids,
    read_corpus_jsonl,
    write_corpus_jsonl,
)
from .errors import FormatVersionError, NotReady, UnknownMode
from .fusion import DEFAULT_C, FusionConfig, rrf_fuse
from .keyword import BM25Params, InvertedIndex, build_index, load_index, save_index, search_keyword
from .structured import StructuredQuery, search_structured
from .structurer import (
    GazetteerLLM,
    LLMClient,
    Lexicons,
    PromptTemplate,
    StructurerResult,
    llm_structure,
)
from .vectors import (
    EmbeddingProvider,
    HashingEmbedder,
    RemoteEmbedder,
    VectorStore,
    load_store,
    save_store,
    search_vector,
)

logger = logging.getLogger(__name__)

ENGINE_FORMAT_VERSION = 1


class SearchMode(str, enum.Enum):
    FULL = "full"
    FAST = "fast"
    KEYWORD_ONLY = "keyword"
    SEMANTIC_ONLY = "semantic"
    STRUCTURED_ONLY = "structured"

    @classmethod
    def parse(cls, value: "str | SearchMode") -> "SearchMode":
        if isinstance(value, SearchMode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownMode(f"unknown mode {value!r}; expected one of {[m.value for m in cls]}") from None


PATHS_BY_MODE = {
    SearchMode.FULL: ("structured", "keyword", "semantic"),
    SearchMode.FAST: ("keyword", "semantic"),
    SearchMode.KEYWORD_ONLY: ("keyword",),
    SearchMode.SEMANTIC_ONLY: ("semantic",),
    SearchMode.STRUCTURED_ONLY: ("structured",),
}

DEFAULT_PER_PATH_K = 50


@dataclass(frozen=True)
class SearchRequest:
    query: str
    mode: SearchMode = SearchMode.FULL
    k: int = 10
    per_path_k: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.query, str) or not self.query.strip():
            raise ValueError("query must be a non-empty string")
        object.__setattr__(self, "mode", SearchMode.parse(self.mode))
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.per_path_k is None:
            object.__setattr__(self, "per_path_k", max(DEFAULT_PER_PATH_K, self.k))
        elif self.per_path_k < self.k:
            raise ValueError("per_path_k must be at least k")


@dataclass
class PathDiagnostics:
    size: int = 0
    elapsed_ms: float = 0.0
    error: str | None = None


@dataclass
class SearchResponse:
    results: RankedList
    mode: SearchMode
    structured_query: StructuredQuery | None = None
    structurer: StructurerResult | None = None
    paths: dict[str, PathDiagnostics] = field(default_factory=dict)
    path_lists: dict[str, RankedList] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict[str, Any]:
        paths = {}
        for name, diag in self.paths.items():
            entry: dict[str, Any] = {"size": diag.size, "error": diag.error}
            if include_timings:
                entry["elapsed_ms"] = round(diag.elapsed_ms, 3)
            paths[name] = entry
        diagnostics: dict[str, Any] = {"mode": self.mode.value, "paths": paths}
        if self.structurer is not None:
            diagnostics["structurer"] = {
                "provenance": self.structurer.provenance,
                "messages": list(self.structurer.diagnostics),
            }
        return {
            "results": [
                {"id": item.doc_id, "score": item.score, "rank": rank}
                for rank, item in enumerate(self.results, start=1)
            ],
            "structured_query": self.structured_query.to_obj() if self.structured_query else None,
            "diagnostics": diagnostics,
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), ensure_ascii=False, sort_keys=True)


@dataclass
class Engine:
    """Everything a search needs. Treat as immutable once built."""

    corpus: tuple[Document, ...]
    index: InvertedIndex
    store: VectorStore
    embedder: EmbeddingProvider
    lexicons: Lexicons = field(default_factory=Lexicons.default)
    template: PromptTemplate = field(default_factory=PromptTemplate.default)
    llm: LLMClient | None = None
    fusion_c: float = DEFAULT_C
    extra_fields: tuple[str, ...] = ()
    # use the gazetteer query when the LLM fails; off keeps FULL == FAST under outage
    rule_fallback: bool = False

    @property
    def analyzer(self) -> AnalyzerConfig:
        return self.index.analyzer

    @property
    def doc_count(self) -> int:
        return len(self.corpus)

    def with_llm(self, llm: LLMClient | None) -> "Engine":
        return dataclasses.replace(self, llm=llm)


_DEFAULT_LLM: Any = object()


def build_engine(
    corpus: Sequence[Document],
    analyzer: AnalyzerConfig = AnalyzerConfig(),
    embedder: EmbeddingProvider | None = None,
    bm25_params: BM25Params = BM25Params(),
    *,
    lexicons: Lexicons | None = None,
    template: PromptTemplate | None = None,
    llm: LLMClient | None = _DEFAULT_LLM,
    fusion_c: float = DEFAULT_C,
    extra_fields: Sequence[str] = (),
    rule_fallback: bool = False,
) -> Engine:
    """Index ``corpus`` for all three paths.

    The embedder defaults to a 64-dimensional :class:`HashingEmbedder` and the
    LLM to the offline :class:`GazetteerLLM`; pass ``llm=None`` to run without one.
    """
    ensure_unique_ids(corpus)
    docs = tuple(sorted(corpus, key=lambda d: d.id))
    embedder = embedder if embedder is not None else HashingEmbedder(64, analyzer)
    lexicons = lexicons if lexicons is not None else Lexicons.default()
    template = template if template is not None else PromptTemplate.default()
    index = build_index(docs, analyzer, bm25_params)
    matrix = np.zeros((len(docs), embedder.dim))
    for row, doc in enumerate(docs):
        matrix[row] = embedder.embed(doc.text)
    store = VectorStore([d.id for d in docs], matrix)
    return Engine(
        corpus=docs,
        index=index,
        store=store,
        embedder=embedder,
        lexicons=lexicons,
        template=template,
        llm=GazetteerLLM(lexicons) if llm is _DEFAULT_LLM else llm,
        fusion_c=fusion_c,
        extra_fields=tuple(extra_fields),
        rule_fallback=rule_fallback,
    )


def ingest(
    corpus_path: str | Path,
    analyzer: AnalyzerConfig = AnalyzerConfig(),
    embedder: EmbeddingProvider | None = None,
    bm25_params: BM25Params = BM25Params(),
    strict: bool = False,
    **options: Any,
) -> tuple[Engine, list[str]]:
    """Read a JSONL corpus and build every structure. Returns the engine and line warnings."""
    docs, warnings = read_corpus_jsonl(corpus_path, strict=strict)
    return build_engine(docs, analyzer, embedder, bm25_params, **options), warnings


def _timed(fn: Callable[[], RankedList], label: str) -> tuple[RankedList, PathDiagnostics]:
    start = time.perf_counter()
    try:
        ranked = fn()
        check_ranked_list(ranked)
        diag = PathDiagnostics(size=len(ranked))
    except Exception as exc:  # a failing path degrades to an empty list
        logger.warning("%s path failed: %s", label, exc)
        ranked = RankedList((), label)
        diag = PathDiagnostics(error=f"{type(exc).__name__}: {exc}")
    diag.elapsed_ms = (time.perf_counter() - start) * 1000.0
    return ranked, diag


def search(engine: Engine | None, req: SearchRequest) -> SearchResponse:
    if engine is None:
        raise NotReady("engine is not loaded")
    paths = PATHS_BY_MODE[req.mode]
    response = SearchResponse(results=RankedList((), "fused"), mode=req.mode)
    lists: list[RankedList] = []
    for path in paths:
        if path == "structured":
            ranked, diag = _structured_path(engine, req, response)
        elif path == "keyword":
            ranked, diag = _timed(lambda: search_keyword(engine.index, req.query, req.per_path_k), "keyword")
        else:
            ranked, diag = _timed(
                lambda: search_vector(engine.store, engine.embedder.embed(req.query), req.per_path_k),
                "semantic",
            )
        response.paths[path] = diag
        response.path_lists[path] = ranked
        lists.append(ranked)
    if len(lists) == 1:
        only = lists[0]
        response.results = RankedList(only.items[: req.k], only.source_label)
    else:
        response.results = rrf_fuse(lists, FusionConfig(engine.fusion_c, req.k))
    return response


def _structured_path(
    engine: Engine, req: SearchRequest, response: SearchResponse
) -> tuple[RankedList, PathDiagnostics]:
    start = time.perf_counter()
    result = llm_structure(engine.llm, req.query, engine.template, engine.lexicons, engine.extra_fields)
    response.structurer = result
    query = result.query
    if result.provenance != "llm" and not engine.rule_fallback:
        query = None
    response.structured_query = query
    if query is None or not query.predicates:
        reason = result.diagnostics[0] if result.diagnostics else "no predicates extracted"
        diag = PathDiagnostics(error=None if result.provenance == "llm" else reason)
        diag.elapsed_ms = (time.perf_counter() - start) * 1000.0
        return RankedList((), "structured"), diag
    ranked, diag = _timed(
        lambda: search_structured(engine.corpus, engine.index, query, req.per_path_k), "structured"
    )
    diag.elapsed_ms = (time.perf_counter() - start) * 1000.0
    return ranked, diag


class EngineHandle:
    """Holder through which a finished engine is published to concurrent readers."""

    def __init__(self, engine: Engine | None = None):
        self._engine = engine
        self._lock = threading.Lock()

    def publish(self, engine: Engine | None) -> None:
        with self._lock:
            self._engine = engine

    def get(self) -> Engine:
        engine = self._engine
        if engine is None:
            raise NotReady("engine is not loaded")
        return engine

    @property
    def ready(self) -> bool:
        return self._engine is not None


def save_engine(engine: Engine, directory: str | Path) -> None:
    """Persist ``engine`` into ``directory``; the directory is replaced atomically."""
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".engine-", dir=directory.parent))
    try:
        write_corpus_jsonl(tmp / "corpus.jsonl", engine.corpus)
        save_index(engine.index, tmp / "index")
        save_store(engine.store, tmp / "vectors")
        config = engine.embedder.config() if hasattr(engine.embedder, "config") else {"kind": "custom"}
        manifest = {
            "version": ENGINE_FORMAT_VERSION,
            "doc_count": engine.doc_count,
            "analyzer": engine.analyzer.to_dict(),
            "bm25": {"k1": engine.index.bm25_params.k1, "b": engine.index.bm25_params.b},
            "fusion": {"c": engine.fusion_c},
            "embedder": config,
            "lexicons": engine.lexicons.to_dict(),
            "prompt_template": engine.template.to_text(),
            "fields": list(engine.template.fields),
            "extra_fields": list(engine.extra_fields),
            "rule_fallback": engine.rule_fallback,
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8")
        if directory.exists():
            old = directory.with_name(directory.name + ".old")
            shutil.rmtree(old, ignore_errors=True)
            os.replace(directory, old)
            os.replace(tmp, directory)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, directory)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_engine(
    directory: str | Path,
    llm: LLMClient | None = None,
    embedder: EmbeddingProvider | None = None,
) -> Engine:
    """Load a persisted engine.

    Without an explicit ``llm`` the offline gazetteer stand-in answers for the
    model. A remote embedder is rebuilt from ``EMBED_ENDPOINT`` when the
    engine was indexed with one and no ``embedder`` is passed.
    """
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("version") != ENGINE_FORMAT_VERSION:
        raise FormatVersionError(f"manifest.json: unsupported version {manifest.get('version')!r}")
    docs, warnings = read_corpus_jsonl(directory / "corpus.jsonl", strict=True)
    index = load_index(directory / "index")
    store = load_store(directory / "vectors")
    analyzer = AnalyzerConfig.from_dict(manifest["analyzer"])
    if embedder is None:
        cfg = manifest["embedder"]
        if cfg["kind"] == "hashing":
            embedder = HashingEmbedder(cfg["dim"], analyzer, cfg.get("seed", 0))
        elif cfg["kind"] == "remote":
            embedder = RemoteEmbedder.from_env(dim=cfg.get("dim"))
        else:
            raise FormatVersionError(f"cannot rebuild embedder of kind {cfg['kind']!r}")
    lexicons = Lexicons.from_dict(manifest["lexicons"])
    template = PromptTemplate.from_text(manifest["prompt_template"], manifest.get("fields") or ())
    if not (len(docs) == index.doc_count == len(store) == manifest["doc_count"]):
        raise FormatVersionError("engine directory is inconsistent: document counts differ")
    return Engine(
        corpus=tuple(docs),
        index=index,
        store=store,
        embedder=embedder,
        lexicons=lexicons,
        template=template,
        llm=llm if llm is not None else GazetteerLLM(lexicons),
        fusion_c=manifest["fusion"]["c"],
        extra_fields=tuple(manifest.get("extra_fields") or ()),
        rule_fallback=manifest.get("rule_fallback", False),
    )
