"""Structured metadata queries in a small Mongo-like JSON dialect.

A query is a JSON object whose keys are metadata fields. A bare value means
equality; an object of operators (``$gt``, ``$gte``, ``$lt``, ``$lte``)
means numeric comparison. All predicates must hold::

    {"indication": "atopic dermatitis", "age": {"$gt": 18},
     "country": "India", "year": {"$gte": 2022}}
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .analysis import tokenize
from .core import (
    Document,
    FieldValue,
    RankedList,
    ScoredDoc,
    string_key,
    validate_field_value,
)
from .errors import (
    BadFieldValue,
    InvalidQuery,
    MalformedJson,
    NonNumericComparison,
    UnknownOperator,
)
from .keyword import InvertedIndex


class Op(str, enum.Enum):
    EQ = "$eq"
    GT = "$gt"
    GTE = "$gte"
    LT = "$lt"
    LTE = "$lte"


COMPARISON_OPS = {op.value: op for op in Op if op is not Op.EQ}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Predicate:
    field: str
    op: Op
    value: FieldValue

    def __post_init__(self) -> None:
        if not isinstance(self.field, str) or not self.field:
            raise InvalidQuery("predicate field must be a non-empty string")
        if self.op is not Op.EQ and not _is_number(self.value):
            raise NonNumericComparison(f"{self.field} {self.op.value} needs a number, got {self.value!r}")

    def holds(self, metadata: Mapping[str, FieldValue]) -> bool:
        if self.field not in metadata:
            return False
        actual = metadata[self.field]
        if self.op is Op.EQ:
            if isinstance(self.value, str):
                return isinstance(actual, str) and string_key(actual) == string_key(self.value)
            return _is_number(actual) and actual == self.value
        if not _is_number(actual):
            return False
        if self.op is Op.GT:
            return actual > self.value
        if self.op is Op.GTE:
            return actual >= self.value
        if self.op is Op.LT:
            return actual < self.value
        return actual <= self.value


@dataclass(frozen=True)
class StructuredQuery:
    predicates: tuple[Predicate, ...] = ()
    source: str = "manual"

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicates", tuple(self.predicates))
        if self.source not in ("llm", "rules", "manual"):
            raise InvalidQuery(f"unknown query source {self.source!r}")
        seen: set[tuple[str, Op]] = set()
        eq_fields = {p.field for p in self.predicates if p.op is Op.EQ}
        for p in self.predicates:
            if (p.field, p.op) in seen:
                raise InvalidQuery(f"duplicate predicate {p.field} {p.op.value}")
            seen.add((p.field, p.op))
            if p.op is not Op.EQ and p.field in eq_fields:
                raise InvalidQuery(f"{p.field}: equality cannot be combined with comparisons")

    def fields(self) -> list[str]:
        return list(dict.fromkeys(p.field for p in self.predicates))

    def keyword_seed(self) -> str:
        """Space-joined string equality values, used to rank the filtered set."""
        return " ".join(p.value for p in self.predicates if isinstance(p.value, str))

    def to_obj(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for p in self.predicates:
            if p.op is Op.EQ:
                out[p.field] = p.value
            else:
                out.setdefault(p.field, {})[p.op.value] = p.value
        return out


def _reject_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise MalformedJson(f"duplicate key {key!r}")
        out[key] = value
    return out


def _reject_constant(name: str) -> Any:
    raise MalformedJson(f"non-standard JSON constant {name}")


def structured_query_from_obj(obj: Any, source: str = "manual") -> StructuredQuery:
    if not isinstance(obj, Mapping):
        raise MalformedJson("structured query must be a JSON object")
    predicates: list[Predicate] = []
    for name, spec in obj.items():
        if not isinstance(name, str) or not name:
            raise MalformedJson("field names must be non-empty strings")
        if isinstance(spec, Mapping):
            if not spec:
                raise UnknownOperator(f"{name}: empty operator object")
            for op_name, value in spec.items():
                op = COMPARISON_OPS.get(op_name)
                if op is None:
                    raise UnknownOperator(f"{name}: unknown operator {op_name!r}")
                if not _is_number(value):
                    raise NonNumericComparison(f"{name} {op_name} needs a number, got {value!r}")
                predicates.append(Predicate(name, op, validate_field_value(value, name)))
        else:
            try:
                value = validate_field_value(spec, name)
            except BadFieldValue as exc:
                raise MalformedJson(str(exc)) from exc
            predicates.append(Predicate(name, Op.EQ, value))
    return StructuredQuery(tuple(predicates), source)


def parse_structured_query(json_text: str, source: str = "manual") -> StructuredQuery:
    try:
        obj = json.loads(json_text, object_pairs_hook=_reject_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    return structured_query_from_obj(obj, source)


def serialize_structured_query(q: StructuredQuery) -> str:
    """Canonical JSON text: keys sorted, equality as bare values."""
    return json.dumps(q.to_obj(), sort_keys=True, ensure_ascii=False)


def matches(q: StructuredQuery, doc: Document) -> bool:
    return all(p.holds(doc.metadata) for p in q.predicates)


def search_structured(
    corpus: Sequence[Document],
    keyword_index: InvertedIndex,
    q: StructuredQuery,
    k: int | None = 10,
) -> RankedList:
    """Filter ``corpus`` by ``q`` and rank survivors by BM25 of the query's string values."""
    if k is not None and k < 1:
        raise ValueError("k must be positive")
    survivors = [doc.id for doc in corpus if matches(q, doc)]
    if not survivors:
        return RankedList((), "structured")
    seed_tokens = tokenize(q.keyword_seed(), keyword_index.analyzer)
    scores = keyword_index.score_all(seed_tokens) if seed_tokens else np.zeros(keyword_index.doc_count)
    pairs = []
    for doc_id in survivors:
        score = float(scores[keyword_index.index_of(doc_id)]) if doc_id in keyword_index else 0.0
        pairs.append((doc_id, score))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    if k is not None:
        pairs = pairs[:k]
    return RankedList(tuple(ScoredDoc(d, s) for d, s in pairs), "structured")

