"""Recall@k / reciprocal-rank evaluation over a set of labelled queries."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..errors import UnknownDocInCases, ValidationError
from ..pipeline import Engine, SearchMode, SearchRequest, search


@dataclass(frozen=True)
class EvalCase:
    query: str
    relevant_ids: frozenset[str]
    mode: SearchMode = SearchMode.FULL
    k: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "relevant_ids", frozenset(self.relevant_ids))
        object.__setattr__(self, "mode", SearchMode.parse(self.mode))
        if not self.relevant_ids:
            raise ValidationError(f"case {self.query!r} has no relevant ids")
        if self.k < 1:
            raise ValidationError("k must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalCase":
        return cls(
            query=data["query"],
            relevant_ids=frozenset(data["relevant_ids"]),
            mode=data.get("mode", "full"),
            k=int(data.get("k", 10)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"query": self.query, "mode": self.mode.value, "relevant_ids": sorted(self.relevant_ids), "k": self.k}


@dataclass
class CaseResult:
    case: EvalCase
    retrieved: list[str]
    recall: float
    reciprocal_rank: float


@dataclass
class EvalReport:
    cases: list[CaseResult] = field(default_factory=list)

    def by_mode(self) -> dict[str, dict[str, float]]:
        groups: dict[str, list[CaseResult]] = defaultdict(list)
        for res in self.cases:
            groups[res.case.mode.value].append(res)
        return {
            mode: {
                "cases": len(rs),
                "recall": sum(r.recall for r in rs) / len(rs),
                "mrr": sum(r.reciprocal_rank for r in rs) / len(rs),
            }
            for mode, rs in sorted(groups.items())
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "cases": [
                {
                    **res.case.to_dict(),
                    "retrieved": res.retrieved,
                    "recall": res.recall,
                    "reciprocal_rank": res.reciprocal_rank,
                }
                for res in self.cases
            ],
            "modes": self.by_mode(),
        }


def recall_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    relevant = set(relevant)
    return len(set(retrieved[:k]) & relevant) / len(relevant)


def reciprocal_rank(retrieved: Sequence[str], relevant: Iterable[str]) -> float:
    relevant = set(relevant)
    for rank, doc_id in enumerate(retrieved, start=1):
        if doc_id in relevant:
            return 1.0 / rank
    return 0.0


def run_eval(engine: Engine, cases: Sequence[EvalCase], mode: SearchMode | str | None = None) -> EvalReport:
    """Evaluate every case; ``mode`` overrides the per-case mode when given."""
    known = {doc.id for doc in engine.corpus}
    for case in cases:
        missing = case.relevant_ids - known
        if missing:
            raise UnknownDocInCases(f"{case.query!r}: unknown ids {sorted(missing)}")
    report = EvalReport()
    for case in cases:
        if mode is not None:
            case = EvalCase(case.query, case.relevant_ids, SearchMode.parse(mode), case.k)
        response = search(engine, SearchRequest(case.query, case.mode, case.k))
        retrieved = response.results.ids()
        report.cases.append(
            CaseResult(
                case,
                retrieved,
                recall_at_k(retrieved, case.relevant_ids, case.k),
                reciprocal_rank(retrieved[: case.k], case.relevant_ids),
            )
        )
    return report


def load_cases(path: str | Path) -> list[EvalCase]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    cases.append(EvalCase.from_dict(json.loads(line)))
                except (KeyError, TypeError, json.JSONDecodeError) as exc:
                    raise ValidationError(f"{path}:{lineno}: bad eval case: {exc}") from exc
    return cases
