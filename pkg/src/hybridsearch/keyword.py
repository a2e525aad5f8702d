"""Inverted index with BM25 scoring.

Documents are assigned dense internal indices in ascending ``doc_id`` order,
so posting lists sorted by index are also sorted by ``doc_id`` and the
standard tie-break reduces to comparing indices.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import AnalyzerConfig, TokenStream, expand_query, tokenize
from .core import CorpusStats, Document, RankedList, ensure_unique_ids, ranked_from_array
from .errors import FormatVersionError, UnknownDoc

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class Posting:
    doc_id: str
    term_freq: int


class InvertedIndex:
    """Immutable token -> postings map plus the corpus statistics BM25 needs."""

    def __init__(
        self,
        doc_ids: Sequence[str],
        doc_len: np.ndarray,
        postings: dict[str, tuple[np.ndarray, np.ndarray]],
        analyzer: AnalyzerConfig,
        bm25_params: BM25Params,
    ):
        self.doc_ids: tuple[str, ...] = tuple(doc_ids)
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        self.doc_len = np.asarray(doc_len, dtype=np.float64)
        self._postings = postings
        self.analyzer = analyzer
        self.bm25_params = bm25_params
        n = len(self.doc_ids)
        self.avg_doc_len = float(self.doc_len.sum() / n) if n else 0.0
        self.doc_len.flags.writeable = False

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @property
    def stats(self) -> CorpusStats:
        return CorpusStats(
            doc_count=self.doc_count,
            avg_doc_len=self.avg_doc_len,
            doc_len={d: int(n) for d, n in zip(self.doc_ids, self.doc_len)},
        )

    def vocabulary(self) -> list[str]:
        return sorted(self._postings)

    def postings(self, token: str) -> list[Posting]:
        entry = self._postings.get(token)
        if entry is None:
            return []
        idx, tf = entry
        return [Posting(self.doc_ids[i], int(f)) for i, f in zip(idx, tf)]

    def doc_freq(self, token: str) -> int:
        entry = self._postings.get(token)
        return 0 if entry is None else len(entry[0])

    def idf(self, token: str) -> float:
        df = self.doc_freq(token)
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def index_of(self, doc_id: str) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise UnknownDoc(doc_id) from None

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._pos

    def score_all(self, query_tokens: Iterable[str]) -> np.ndarray:
        """BM25 score of every document (by internal index) for one token stream."""
        scores = np.zeros(self.doc_count)
        if not self.doc_count:
            return scores
        k1, b = self.bm25_params.k1, self.bm25_params.b
        avg = self.avg_doc_len or 1.0
        for token in sorted(set(query_tokens)):
            entry = self._postings.get(token)
            if entry is None:
                continue
            idx, tf = entry
            norm = k1 * (1.0 - b + b * self.doc_len[idx] / avg)
            scores[idx] += self.idf(token) * tf * (k1 + 1.0) / (tf + norm)
        return scores


def build_index(
    corpus: Sequence[Document],
    analyzer: AnalyzerConfig = AnalyzerConfig(),
    bm25_params: BM25Params = BM25Params(),
) -> InvertedIndex:
    ensure_unique_ids(corpus)
    docs = sorted(corpus, key=lambda d: d.id)
    raw: dict[str, tuple[list[int], list[int]]] = {}
    doc_len = np.zeros(len(docs))
    for i, doc in enumerate(docs):
        tokens = tokenize(doc.text, analyzer)
        doc_len[i] = len(tokens)
        for token, count in Counter(tokens).items():
            ids, tfs = raw.setdefault(token, ([], []))
            ids.append(i)
            tfs.append(count)
    postings = {
        t: (np.asarray(ids, dtype=np.int64), np.asarray(tfs, dtype=np.float64))
        for t, (ids, tfs) in raw.items()
    }
    return InvertedIndex([d.id for d in docs], doc_len, postings, analyzer, bm25_params)


def bm25_score(index: InvertedIndex, query_tokens: TokenStream, doc_id: str) -> float:
    """Okapi BM25 score of one document; each distinct query token counts once."""
    i = index.index_of(doc_id)
    k1, b = index.bm25_params.k1, index.bm25_params.b
    dl = float(index.doc_len[i])
    avg = index.avg_doc_len or 1.0
    total = 0.0
    for token in sorted(set(query_tokens)):
        entry = index._postings.get(token)
        if entry is None:
            continue
        idx, tf = entry
        j = int(np.searchsorted(idx, i))
        if j == len(idx) or idx[j] != i:
            continue
        f = float(tf[j])
        total += index.idf(token) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * dl / avg))
    return total


def search_keyword(index: InvertedIndex, query: str, k: int | None = 10) -> RankedList:
    """Disjunctive BM25 search; the score of a document is its best score over expansion variants."""
    if k is not None and k < 1:
        raise ValueError("k must be positive")
    tokens = tokenize(query, index.analyzer)
    variants = expand_query(tokens, index.analyzer)
    scores = np.zeros(index.doc_count)
    hit = np.zeros(index.doc_count, dtype=bool)
    for variant in variants:
        scores = np.maximum(scores, index.score_all(variant))
        for token in set(variant):
            entry = index._postings.get(token)
            if entry is not None:
                hit[entry[0]] = True
    return ranked_from_array(index.doc_ids, scores, np.flatnonzero(hit), "keyword", k)


def save_index(index: InvertedIndex, directory: str | Path) -> None:
    """Write ``stats.json`` and ``postings.json`` under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stats = {
        "version": INDEX_FORMAT_VERSION,
        "doc_ids": list(index.doc_ids),
        "doc_len": [int(x) for x in index.doc_len],
        "bm25": {"k1": index.bm25_params.k1, "b": index.bm25_params.b},
        "analyzer": index.analyzer.to_dict(),
    }
    postings = {
        "version": INDEX_FORMAT_VERSION,
        "postings": {
            t: [[int(i) for i in idx], [int(f) for f in tf]]
            for t, (idx, tf) in sorted(index._postings.items())
        },
    }
    (directory / "stats.json").write_text(json.dumps(stats, ensure_ascii=False), encoding="utf-8")
    (directory / "postings.json").write_text(json.dumps(postings, ensure_ascii=False), encoding="utf-8")


def _check_version(data: dict, what: str) -> None:
    if data.get("version") != INDEX_FORMAT_VERSION:
        raise FormatVersionError(f"{what}: unsupported version {data.get('version')!r}")


def load_index(directory: str | Path) -> InvertedIndex:
    directory = Path(directory)
    stats = json.loads((directory / "stats.json").read_text(encoding="utf-8"))
    _check_version(stats, "stats.json")
    raw = json.loads((directory / "postings.json").read_text(encoding="utf-8"))
    _check_version(raw, "postings.json")
    postings = {
        t: (np.asarray(idx, dtype=np.int64), np.asarray(tf, dtype=np.float64))
        for t, (idx, tf) in raw["postings"].items()
    }
    return InvertedIndex(
        stats["doc_ids"],
        np.asarray(stats["doc_len"], dtype=np.float64),
        postings,
        AnalyzerConfig.from_dict(stats["analyzer"]),
        BM25Params(**stats["bm25"]),
    )
