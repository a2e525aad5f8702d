"""Domain types shared by every retrieval path.

Documents carry an id, a free-text body and flat metadata whose values are
strings or finite numbers. Every retrieval path returns a :class:`RankedList`
ordered by descending score with ties broken by ascending ``doc_id``; ranks
are 1-based.
"""

from __future__ import annotations

import json
import logging
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .analysis import AnalyzerConfig, tokenize
from .errors import BadFieldValue, DuplicateDocId, EmptyId, ValidationError

logger = logging.getLogger(__name__)

FieldValue = Union[str, int, float]

# Largest integer a float64 represents exactly.
MAX_EXACT_INT = 2**53


def normalize_string(value: str) -> str:
    return unicodedata.normalize("NFC", value).strip()


def string_key(value: str) -> str:
    """Comparison key for string field values: NFC, trimmed, case-folded."""
    return normalize_string(value).casefold()


def validate_field_value(value: Any, name: str = "value") -> FieldValue:
    """Return ``value`` normalized, or raise :class:`BadFieldValue`."""
    if isinstance(value, bool):
        raise BadFieldValue(f"{name}: booleans are not field values")
    if isinstance(value, str):
        return normalize_string(value)
    if isinstance(value, int):
        if abs(value) > MAX_EXACT_INT:
            raise BadFieldValue(f"{name}: integer {value} exceeds 2**53")
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise BadFieldValue(f"{name}: non-finite number {value!r}")
        return value
    raise BadFieldValue(f"{name}: expected string or number, got {type(value).__name__}")


@dataclass(frozen=True)
class Document:
    id: str
    text: str = ""
    metadata: Mapping[str, FieldValue] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "text": self.text, "metadata": dict(self.metadata)}


def validate_document(raw: Mapping[str, Any] | Document) -> Document:
    """Build a :class:`Document` from a candidate mapping, normalizing metadata strings."""
    if isinstance(raw, Document):
        raw = raw.to_dict()
    if not isinstance(raw, Mapping):
        raise ValidationError(f"document must be an object, got {type(raw).__name__}")
    doc_id = raw.get("id")
    if not isinstance(doc_id, str) or not doc_id.strip():
        raise EmptyId("document id is missing or blank")
    text = raw.get("text", "")
    if text is None:
        text = ""
    if not isinstance(text, str):
        raise ValidationError(f"{doc_id}: text must be a string")
    raw_meta = raw.get("metadata") or {}
    if not isinstance(raw_meta, Mapping):
        raise ValidationError(f"{doc_id}: metadata must be an object")
    metadata: dict[str, FieldValue] = {}
    for key, value in raw_meta.items():
        if not isinstance(key, str) or not key:
            raise ValidationError(f"{doc_id}: metadata keys must be non-empty strings")
        metadata[key] = validate_field_value(value, f"{doc_id}.{key}")
    return Document(id=doc_id, text=text, metadata=metadata)


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float


def _sort_key(item: ScoredDoc) -> tuple[float, str]:
    return (-item.score, item.doc_id)


@dataclass(frozen=True)
class RankedList:
    """Ordered ``(doc_id, score)`` pairs produced by one retrieval path or by fusion."""

    items: tuple[ScoredDoc, ...] = ()
    source_label: str = ""

    @classmethod
    def from_scores(
        cls,
        scores: Mapping[str, float] | Iterable[tuple[str, float]],
        source_label: str,
        k: int | None = None,
    ) -> "RankedList":
        pairs = scores.items() if isinstance(scores, Mapping) else scores
        items = sorted((ScoredDoc(d, float(s)) for d, s in pairs), key=_sort_key)
        if k is not None:
            items = items[:k]
        ranked = cls(tuple(items), source_label)
        check_ranked_list(ranked)
        return ranked

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[ScoredDoc]:
        return iter(self.items)

    def __getitem__(self, i: int) -> ScoredDoc:
        return self.items[i]

    def ids(self) -> list[str]:
        return [item.doc_id for item in self.items]

    def scores(self) -> list[float]:
        return [item.score for item in self.items]

    def rank_of(self, doc_id: str) -> int | None:
        for rank, item in enumerate(self.items, start=1):
            if item.doc_id == doc_id:
                return rank
        return None


def check_ranked_list(ranked: RankedList) -> None:
    """Raise ``AssertionError`` unless ``ranked`` satisfies the RankedList invariants."""
    seen: set[str] = set()
    prev: ScoredDoc | None = None
    for item in ranked.items:
        if not math.isfinite(item.score) or item.score < 0:
            raise AssertionError(f"bad score {item.score!r} for {item.doc_id}")
        if item.doc_id in seen:
            raise AssertionError(f"duplicate doc_id {item.doc_id}")
        seen.add(item.doc_id)
        if prev is not None and _sort_key(prev) > _sort_key(item):
            raise AssertionError(f"order violated between {prev.doc_id} and {item.doc_id}")
        prev = item


def ranked_from_array(
    index_ids: Sequence[str], scores: np.ndarray, candidates: np.ndarray, label: str, k: int | None
) -> RankedList:
    """Top-k of ``scores[candidates]`` with the standard tie-break; ids must be sorted."""
    cand = np.asarray(candidates, dtype=np.int64)
    order = cand[np.lexsort((cand, -scores[cand]))]
    if k is not None:
        order = order[:k]
    return RankedList(tuple(ScoredDoc(index_ids[i], float(scores[i])) for i in order), label)


@dataclass(frozen=True)
class CorpusStats:
    doc_count: int
    avg_doc_len: float
    doc_len: Mapping[str, int]


def compute_corpus_stats(corpus: Sequence[Document], analyzer: AnalyzerConfig) -> CorpusStats:
    doc_len = {doc.id: len(tokenize(doc.text, analyzer)) for doc in corpus}
    n = len(doc_len)
    avg = sum(doc_len.values()) / n if n else 0.0
    return CorpusStats(doc_count=n, avg_doc_len=avg, doc_len=doc_len)


def ensure_unique_ids(corpus: Iterable[Document]) -> None:
    seen: set[str] = set()
    for doc in corpus:
        if doc.id in seen:
            raise DuplicateDocId(doc.id)
        seen.add(doc.id)


def read_corpus_jsonl(path: str | Path, strict: bool = False) -> tuple[list[Document], list[str]]:
    """Read a JSON Lines corpus.

    Returns the validated documents and a list of line-numbered warnings for
    skipped lines. In strict mode the first bad line raises instead.
    Duplicate ids always raise :class:`DuplicateDocId`.
    """
    docs: list[Document] = []
    warnings: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = validate_document(json.loads(line))
            except (json.JSONDecodeError, ValidationError) as exc:
                msg = f"line {lineno}: {type(exc).__name__}: {exc}"
                if strict:
                    raise ValidationError(msg) from exc
                logger.warning(msg)
                warnings.append(msg)
                continue
            if doc.id in seen:
                raise DuplicateDocId(f"line {lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs, warnings


def write_corpus_jsonl(path: str | Path, corpus: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
