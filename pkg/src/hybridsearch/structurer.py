"""Natural-language query -> StructuredQuery, via an LLM with a gazetteer fallback.

The LLM path renders a prompt, pulls the first JSON object out of whatever
the model answers, and validates it against the structured-query dialect and
a field whitelist. Any failure falls back to :func:`rule_based_extract`, a
longest-match scan over typed gazetteers plus a small year recognizer, so the
caller always gets a result together with diagnostics explaining how it was
produced.
"""

from __future__ import annotations

import json
import os
import re
import unicodedata
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

from .analysis import tokenize
from .errors import (
    HybridSearchError,
    InvalidQuery,
    MalformedJson,
    MalformedResponse,
    NonNumericComparison,
    ProviderUnavailable,
    UnknownOperator,
    ValidationError,
)
from .structured import Op, Predicate, StructuredQuery, structured_query_from_obj

DEFAULT_FIELDS = ("indication", "country", "age", "year")

YEAR_MIN, YEAR_MAX = 1800, 2199
_YEAR_RE = re.compile(r"^\d{4}$")
_YEAR_CUES = {
    "since": Op.GTE,
    "from": Op.GTE,
    "after": Op.GT,
    "before": Op.LT,
    "until": Op.LTE,
    "through": Op.LTE,
    "in": Op.EQ,
}


def _norm_phrase(text: str) -> tuple[str, ...]:
    return tokenize(unicodedata.normalize("NFC", text))


@dataclass
class Lexicons:
    """Typed gazetteers. Phrases are matched on normalized tokens; values keep their display form."""

    indications: dict[tuple[str, ...], str] = field(default_factory=dict)
    countries: dict[tuple[str, ...], str] = field(default_factory=dict)
    age_groups: dict[tuple[str, ...], Predicate] = field(default_factory=dict)
    extras: dict[str, dict[tuple[str, ...], str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        owner: dict[tuple[str, ...], str] = {}
        for kind, table in self._tables():
            for phrase in table:
                if not phrase:
                    raise ValidationError(f"{kind}: empty phrase")
                if phrase in owner and owner[phrase] != kind:
                    raise ValidationError(f"phrase {' '.join(phrase)!r} is in both {owner[phrase]} and {kind}")
                owner[phrase] = kind
        self._phrases = {p: kind for kind, table in self._tables() for p in table}
        self._longest = max((len(p) for p in self._phrases), default=0)

    def _tables(self) -> list[tuple[str, Mapping[tuple[str, ...], Any]]]:
        tables: list[tuple[str, Mapping[tuple[str, ...], Any]]] = [
            ("indication", self.indications),
            ("country", self.countries),
            ("age_group", self.age_groups),
        ]
        tables.extend(sorted(self.extras.items()))
        return tables

    @property
    def fields(self) -> tuple[str, ...]:
        extra = tuple(f for f in sorted(self.extras) if f not in DEFAULT_FIELDS)
        age = tuple(sorted({p.field for p in self.age_groups.values()} - set(DEFAULT_FIELDS)))
        return DEFAULT_FIELDS + age + extra

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Lexicons":
        def phrases(items: Iterable[str]) -> dict[tuple[str, ...], str]:
            out = {}
            for item in items:
                display = unicodedata.normalize("NFC", item).strip()
                out.setdefault(_norm_phrase(display), display)
            return out

        age_groups = {}
        for phrase, spec in (data.get("age_groups") or {}).items():
            q = structured_query_from_obj(spec)
            if len(q.predicates) != 1:
                raise ValidationError(f"age group {phrase!r} must map to exactly one predicate")
            age_groups[_norm_phrase(phrase)] = q.predicates[0]
        extras = {name: phrases(items) for name, items in (data.get("extras") or {}).items()}
        return cls(
            indications=phrases(data.get("indications") or ()),
            countries=phrases(data.get("countries") or ()),
            age_groups=age_groups,
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "indications": sorted(self.indications.values()),
            "countries": sorted(self.countries.values()),
            "age_groups": {
                " ".join(k): StructuredQuery((p,)).to_obj() for k, p in sorted(self.age_groups.items())
            },
            "extras": {name: sorted(t.values()) for name, t in sorted(self.extras.items())},
        }

    @classmethod
    def load(cls, path: str | Path) -> "Lexicons":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "Lexicons":
        text = resources.files("hybridsearch").joinpath("data/lexicons.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def match_at(self, tokens: tuple[str, ...], i: int) -> tuple[int, str, tuple[str, ...]] | None:
        """Longest gazetteer phrase starting at ``tokens[i]``: ``(length, kind, phrase)``."""
        for length in range(min(self._longest, len(tokens) - i), 0, -1):
            cand = tokens[i : i + length]
            kind = self._phrases.get(cand)
            if kind is not None:
                return length, kind, cand
        return None

    def predicate_for(self, kind: str, phrase: tuple[str, ...]) -> Predicate:
        if kind == "indication":
            return Predicate("indication", Op.EQ, self.indications[phrase])
        if kind == "country":
            return Predicate("country", Op.EQ, self.countries[phrase])
        if kind == "age_group":
            return self.age_groups[phrase]
        return Predicate(kind, Op.EQ, self.extras[kind][phrase])


@dataclass
class StructurerResult:
    query: StructuredQuery | None
    provenance: str
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.query is None and not self.diagnostics:
            raise ValueError("a result without a query must carry diagnostics")


def _year_at(tokens: tuple[str, ...], i: int) -> tuple[int, Predicate] | None:
    tok = tokens[i]
    if tok in _YEAR_CUES and i + 1 < len(tokens) and _is_year(tokens[i + 1]):
        return 2, Predicate("year", _YEAR_CUES[tok], int(tokens[i + 1]))
    if _is_year(tok):
        return 1, Predicate("year", Op.EQ, int(tok))
    return None


def _is_year(tok: str) -> bool:
    return bool(_YEAR_RE.match(tok)) and YEAR_MIN <= int(tok) <= YEAR_MAX


def rule_based_extract(nl_query: str, lex: Lexicons) -> StructurerResult:
    """Gazetteer and year-pattern extraction; first hit per ``(field, op)`` wins."""
    tokens = tokenize(nl_query)
    predicates: list[Predicate] = []
    taken: set[tuple[str, Op]] = set()
    diagnostics: list[str] = []
    i = 0
    while i < len(tokens):
        found = _year_at(tokens, i)
        if found is not None:
            step, pred = found
        else:
            hit = lex.match_at(tokens, i)
            if hit is None:
                i += 1
                continue
            step, kind, phrase = hit
            pred = lex.predicate_for(kind, phrase)
        key = (pred.field, pred.op)
        eq_clash = any(f == pred.field and (o is Op.EQ) != (pred.op is Op.EQ) for f, o in taken)
        if key in taken or eq_clash:
            diagnostics.append(f"ignored repeated {pred.field} constraint {pred.value!r}")
        else:
            taken.add(key)
            predicates.append(pred)
        i += step
    if not predicates:
        diagnostics.append("no entities recognized")
        return StructurerResult(None, "rules", diagnostics)
    return StructurerResult(StructuredQuery(tuple(predicates), "rules"), "rules", diagnostics)


def schema_description(fields: Iterable[str]) -> str:
    props = {}
    for name in fields:
        props[name] = {
            "oneOf": [
                {"type": ["string", "number"]},
                {
                    "type": "object",
                    "properties": {op: {"type": "number"} for op in ("$gt", "$gte", "$lt", "$lte")},
                    "additionalProperties": False,
                    "minProperties": 1,
                },
            ]
        }
    schema = {"type": "object", "properties": props, "additionalProperties": False}
    return json.dumps(schema, indent=2, sort_keys=True)


@dataclass(frozen=True)
class PromptTemplate:
    system: str
    user: str
    fields: tuple[str, ...] = DEFAULT_FIELDS

    @classmethod
    def from_text(cls, text: str, fields: Iterable[str] = DEFAULT_FIELDS) -> "PromptTemplate":
        """Parse template text; a line holding only ``---`` separates system from user part."""
        parts = re.split(r"^---\s*$", text, maxsplit=1, flags=re.MULTILINE)
        if len(parts) == 2:
            return cls(parts[0].strip("\n"), parts[1].strip("\n"), tuple(fields))
        return cls("", text.strip("\n"), tuple(fields))

    @classmethod
    def load(cls, path: str | Path, fields: Iterable[str] = DEFAULT_FIELDS) -> "PromptTemplate":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), fields)

    @classmethod
    def default(cls, fields: Iterable[str] = DEFAULT_FIELDS) -> "PromptTemplate":
        text = resources.files("hybridsearch").joinpath("data/prompt.txt").read_text(encoding="utf-8")
        return cls.from_text(text, fields)

    def to_text(self) -> str:
        return f"{self.system}\n---\n{self.user}\n" if self.system else self.user + "\n"


def build_prompt(nl_query: str, template: PromptTemplate) -> str:
    """Render the template. The query is inserted as a JSON string literal so it stays inert."""
    schema = schema_description(template.fields)
    literal = json.dumps(nl_query, ensure_ascii=False)

    def render(part: str) -> str:
        # single pass so a query containing "{{schema}}" is never expanded
        return re.sub(r"\{\{(query|schema)\}\}", lambda m: literal if m.group(1) == "query" else schema, part)

    rendered = [render(p) for p in (template.system, template.user) if p]
    return "\n\n".join(rendered)


_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*")


def extract_json_object(text: str) -> dict | None:
    """First JSON object embedded in ``text``, tolerating prose and code fences."""
    cleaned = _FENCE_RE.sub(" ", text)
    decoder = json.JSONDecoder()
    pos = cleaned.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(cleaned, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        pos = cleaned.find("{", pos + 1)
    return None


class LLMClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpLLMClient:
    """HTTP completion client.

    Sends ``{"prompt": ...}`` (or ``{"messages": [...]}`` with ``chat=True``)
    and expects ``{"text": ...}`` back.
    """

    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 10.0, chat: bool = False):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.chat = chat

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **kwargs: Any) -> "HttpLLMClient | None":
        env = os.environ if env is None else env
        endpoint = env.get("LLM_ENDPOINT")
        if not endpoint:
            return None
        return cls(endpoint, env.get("LLM_API_KEY"), **kwargs)

    def complete(self, prompt: str) -> str:
        if self.chat:
            body = {"messages": [{"role": "user", "content": prompt}]}
        else:
            body = {"prompt": prompt}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(
            self.endpoint, data=json.dumps(body).encode("utf-8"), headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderUnavailable(f"LLM request failed: {exc}") from exc
        try:
            payload = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedResponse(f"LLM response is not JSON: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise MalformedResponse("LLM response lacks a 'text' string")
        return payload["text"]


class GazetteerLLM:
    """Offline stand-in for an LLM: answers with the gazetteer extraction as JSON."""

    def __init__(self, lex: Lexicons):
        self.lex = lex

    def complete(self, prompt: str) -> str:
        match = re.search(r"Request \(JSON string\): (\".*\")\s*$", prompt, flags=re.DOTALL)
        query = json.loads(match.group(1)) if match else prompt
        result = rule_based_extract(query, self.lex)
        obj = result.query.to_obj() if result.query else {}
        return "```json\n" + json.dumps(obj, ensure_ascii=False) + "\n```"


_SCHEMA_ERRORS = (UnknownOperator, NonNumericComparison, InvalidQuery, ValidationError)


def llm_structure(
    client: LLMClient | None,
    nl_query: str,
    template: PromptTemplate,
    lex: Lexicons,
    extra_fields: Iterable[str] = (),
) -> StructurerResult:
    """Structure ``nl_query`` with the LLM; never raises, falls back to the gazetteer."""
    allowed = set(template.fields) | set(lex.fields) | set(extra_fields)
    failure: str
    if client is None:
        failure = "ProviderUnavailable: no LLM client configured"
    else:
        try:
            text = client.complete(build_prompt(nl_query, template))
        except ProviderUnavailable as exc:
            failure = f"ProviderUnavailable: {exc}"
        except MalformedResponse as exc:
            failure = f"MalformedOutput: {exc}"
        except Exception as exc:  # provider bugs must not abort a search
            failure = f"ProviderUnavailable: {type(exc).__name__}: {exc}"
        else:
            query, failure = _query_from_completion(text, allowed)
            if query is not None:
                return StructurerResult(query, "llm", [])
    fallback = rule_based_extract(nl_query, lex)
    fallback.diagnostics.insert(0, failure)
    return fallback


def _query_from_completion(text: Any, allowed: set[str]) -> tuple[StructuredQuery | None, str]:
    """Validated query from a completion, or ``None`` plus the failure diagnostic."""
    if not isinstance(text, str):
        return None, "MalformedOutput: completion is not text"
    obj = extract_json_object(text)
    if obj is None:
        return None, "MalformedOutput: no JSON object in completion"
    try:
        query = structured_query_from_obj(obj, source="llm")
    except MalformedJson as exc:
        return None, f"MalformedOutput: {exc}"
    except _SCHEMA_ERRORS as exc:
        return None, f"SchemaViolation: {exc}"
    except HybridSearchError as exc:
        return None, f"MalformedOutput: {exc}"
    unknown = sorted(set(query.fields()) - allowed)
    if unknown:
        return None, f"SchemaViolation: fields not allowed: {', '.join(unknown)}"
    return query, ""
