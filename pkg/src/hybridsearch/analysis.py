"""Tokenization, normalization and synonym-based query expansion."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

TokenStream = tuple[str, ...]


class _WordCharTable(dict):
    """``str.translate`` table mapping every non-word code point to a space.

    Word characters are letters, marks and numbers (Unicode categories L*, M*,
    N*). Entries are filled lazily so the table only grows with the alphabet
    actually seen.
    """

    def __missing__(self, codepoint: int) -> int:
        cat = unicodedata.category(chr(codepoint))
        value = codepoint if cat[0] in "LMN" else 0x20
        self[codepoint] = value
        return value


_WORD_TABLE = _WordCharTable()


def _split(text: str, strip_punctuation: bool) -> list[str]:
    text = unicodedata.normalize("NFC", text)
    if strip_punctuation:
        text = text.translate(_WORD_TABLE)
    return text.split()


def _phrase(text: str, lowercase: bool = True, strip_punctuation: bool = True) -> TokenStream:
    tokens = _split(text, strip_punctuation)
    if lowercase:
        tokens = [t.lower() for t in tokens]
    return tuple(tokens)


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    stopwords: frozenset[str] = frozenset()
    synonym_table: Mapping[TokenStream, frozenset[TokenStream]] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        lowercase: bool = True,
        strip_punctuation: bool = True,
        stopwords: Iterable[str] = (),
        synonyms: Mapping[str, Iterable[str]] | None = None,
    ) -> "AnalyzerConfig":
        """Construct a config from raw strings, normalizing stopwords and phrases."""
        stops = frozenset(t for w in stopwords for t in _phrase(w, lowercase, strip_punctuation))
        table: dict[TokenStream, set[TokenStream]] = {}
        for key, alts in (synonyms or {}).items():
            k = _phrase(key, lowercase, strip_punctuation)
            if not k:
                continue
            for alt in alts:
                a = _phrase(alt, lowercase, strip_punctuation)
                if a and a != k:
                    table.setdefault(k, set()).add(a)
        return cls(
            lowercase=lowercase,
            strip_punctuation=strip_punctuation,
            stopwords=stops,
            synonym_table={k: frozenset(v) for k, v in table.items()},
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "lowercase": self.lowercase,
            "strip_punctuation": self.strip_punctuation,
            "stopwords": sorted(self.stopwords),
            "synonyms": {
                " ".join(k): sorted(" ".join(a) for a in alts)
                for k, alts in sorted(self.synonym_table.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnalyzerConfig":
        return cls.build(
            lowercase=data.get("lowercase", True),
            strip_punctuation=data.get("strip_punctuation", True),
            stopwords=data.get("stopwords", ()),
            synonyms=data.get("synonyms") or {},
        )


DEFAULT_ANALYZER = AnalyzerConfig()


def tokenize(text: str, config: AnalyzerConfig = DEFAULT_ANALYZER) -> TokenStream:
    """Split ``text`` into normalized tokens.

    >>> tokenize("EGFR-positive, stage IV.")
    ('egfr', 'positive', 'stage', 'iv')
    """
    tokens = _split(text, config.strip_punctuation)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    return tuple(tokens)


def _segment(tokens: TokenStream, phrases: Mapping[TokenStream, Any]) -> list[tuple[int, TokenStream]]:
    """Left-to-right longest-match scan; returns non-overlapping ``(start, phrase)`` hits."""
    if not phrases:
        return []
    longest = max(len(p) for p in phrases)
    hits = []
    i, n = 0, len(tokens)
    while i < n:
        for length in range(min(longest, n - i), 0, -1):
            cand = tokens[i : i + length]
            if cand in phrases:
                hits.append((i, cand))
                i += length
                break
        else:
            i += 1
    return hits


def _substitute(tokens: TokenStream, starts: list[int], length: int, repl: TokenStream) -> TokenStream:
    out: list[str] = []
    i = 0
    for s in starts:
        out.extend(tokens[i:s])
        out.extend(repl)
        i = s + length
    out.extend(tokens[i:])
    return tuple(out)


def expand_query(tokens: TokenStream, config: AnalyzerConfig = DEFAULT_ANALYZER) -> list[TokenStream]:
    """Return the original stream followed by one variant per applicable synonym rule.

    A rule is one ``(phrase, alternative)`` pair of the synonym table. Each
    variant replaces every occurrence of the phrase picked by a longest-match,
    non-overlapping scan; rules are never combined with each other.
    """
    tokens = tuple(tokens)
    variants = [tokens]
    occurrences: dict[TokenStream, list[int]] = {}
    for start, phrase in _segment(tokens, config.synonym_table):
        occurrences.setdefault(phrase, []).append(start)
    for phrase in sorted(occurrences):
        for alt in sorted(config.synonym_table[phrase]):
            variant = _substitute(tokens, occurrences[phrase], len(phrase), alt)
            if variant not in variants:
                variants.append(variant)
    return variants


def _canonical_map(config: AnalyzerConfig) -> dict[TokenStream, TokenStream]:
    canon: dict[TokenStream, TokenStream] = {}
    for key in sorted(config.synonym_table):
        for alt in config.synonym_table[key]:
            canon.setdefault(alt, key)
    return canon


def canonical_synonym_tokens(tokens: TokenStream, config: AnalyzerConfig = DEFAULT_ANALYZER) -> TokenStream:
    """Tokens of the canonical phrases for every alternative phrase found in ``tokens``.

    With the rule ``lung cancer -> lung carcinoma``, the stream
    ``("lung", "carcinoma", "study")`` yields ``("lung", "cancer")``.
    """
    canon = _canonical_map(config)
    out: list[str] = []
    for _, alt in _segment(tuple(tokens), canon):
        out.extend(canon[alt])
    return tuple(out)


def load_synonyms(path: str | Path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(x, str) for x in v)
        for k, v in data.items()
    ):
        raise ValueError(f"{path}: synonym file must map phrases to arrays of phrases")
    return data


def load_stopwords(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
