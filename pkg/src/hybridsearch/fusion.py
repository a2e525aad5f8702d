"""Reciprocal Rank Fusion of ranked lists.

A document's fused score is the sum, over the lists that contain it, of
``1 / (rank + c)`` with 1-based ranks. Input scores are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import RankedList

DEFAULT_C = 60.0


@dataclass(frozen=True)
class FusionConfig:
    c: float = DEFAULT_C
    k_out: int = 10

    def __post_init__(self) -> None:
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be a finite non-negative number, got {self.c}")
        if self.k_out < 1:
            raise ValueError(f"k_out must be positive, got {self.k_out}")


def rank_positions(lists: Sequence[RankedList]) -> dict[str, list[int | None]]:
    """Map every document to its 1-based rank in each list, ``None`` where absent."""
    positions: dict[str, list[int | None]] = {}
    for k, ranked in enumerate(lists):
        for rank, item in enumerate(ranked, start=1):
            slot = positions.setdefault(item.doc_id, [None] * len(lists))
            if slot[k] is not None:
                raise ValueError(f"{item.doc_id} appears twice in list {k}")
            slot[k] = rank
    return positions


def rrf_scores(positions: dict[str, list[int | None]], c: float) -> dict[str, float]:
    # summed exactly and rounded once, so mathematically equal sums such as
    # 1/6 and 1/10 + 1/15 come out bit-identical and fall to the doc_id tie-break
    base = Fraction(c)
    return {
        doc_id: float(sum((1 / (r + base) for r in ranks if r is not None), Fraction(0)))
        for doc_id, ranks in positions.items()
    }


def rrf_fuse(lists: Sequence[RankedList], config: FusionConfig = FusionConfig()) -> RankedList:
    scores = rrf_scores(rank_positions(lists), config.c)
    return RankedList.from_scores(scores, "fused", config.k_out)
