"""Seeded synthetic corpora with labelled queries.

:func:`hybrid_eval_set` builds a 200-document biomedical-flavoured corpus and
25 labelled queries of three kinds:

* exact keyword queries naming a rare drug,
* synonym-only queries whose relevant documents use only the alternative
  phrase (the query says "lung cancer", the documents say "lung carcinoma"),
* metadata-constrained queries ("psoriasis in adults in Brazil since 2020")
  whose relevant documents are defined by their metadata, not their text.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import Document, validate_document

FILLER = (
    "study patients results analysis cohort treatment outcomes clinical report data "
    "observed response baseline follow dose safety efficacy review protocol visit "
    "measured group control randomized enrolled sample evidence primary secondary "
    "endpoint reduction improvement assessment score change week month investigators "
    "participants period phase site centre monitoring adverse events reported therapy"
).split()

DRUGS = (
    ("pembrolizumab", "checkpoint"),
    ("osimertinib", "resistance"),
    ("dupilumab", "injection"),
    ("semaglutide", "weight"),
    ("tocilizumab", "infusion"),
    ("remdesivir", "antiviral"),
    ("adalimumab", "biosimilar"),
    ("sotorasib", "mutation"),
    ("levetiracetam", "seizure"),
    ("erenumab", "prophylaxis"),
)

# (canonical phrase used in queries, alternative phrase used in relevant documents, indication)
SYNONYM_PAIRS = (
    ("lung cancer", "lung carcinoma", "lung cancer"),
    ("heart attack", "myocardial infarction", "heart failure"),
    ("high blood pressure", "arterial hypertension", "hypertension"),
    ("kidney failure", "renal insufficiency", "chronic kidney disease"),
    ("brain stroke", "cerebrovascular accident", None),
    ("blood clot", "venous thrombus", None),
    ("bone thinning", "osteopenia", "osteoporosis"),
)

# near-miss texts sharing single tokens with the synonym queries
SYNONYM_DISTRACTORS = (
    "lung function spirometry",
    "cancer screening uptake",
    "heart rate variability",
    "attack frequency diary",
    "blood pressure cuff calibration",
    "kidney stones imaging",
    "bone marrow aspirate",
    "blood sample storage",
    "stroke volume echocardiography",
)

META_INDICATIONS = (
    "atopic dermatitis",
    "psoriasis",
    "asthma",
    "migraine",
    "type 2 diabetes",
    "rheumatoid arthritis",
    "epilepsy",
    "obesity",
)
META_COUNTRIES = ("India", "Germany", "Brazil", "Japan")
BACKGROUND_INDICATIONS = ("malaria", "tuberculosis", "influenza", "depression", "hepatitis b")


@dataclass(frozen=True)
class LabelledQuery:
    query: str
    relevant_ids: frozenset[str]
    kind: str  # "keyword", "synonym" or "metadata"


@dataclass(frozen=True)
class EvalSet:
    corpus: tuple[Document, ...]
    queries: tuple[LabelledQuery, ...]
    synonyms: dict[str, list[str]]


def _filler(rng: random.Random, lo: int = 8, hi: int = 14) -> str:
    return " ".join(rng.choice(FILLER) for _ in range(rng.randint(lo, hi)))


def _meta(rng: random.Random, indication: str | None) -> dict:
    meta = {
        "country": rng.choice(META_COUNTRIES + ("Kenya", "Canada")),
        "year": rng.randint(2012, 2024),
        "age": rng.randint(4, 80),
    }
    if indication:
        meta["indication"] = indication
    return meta


def _satisfies(meta: dict, indication: str, country: str, age: str | None, since: int | None) -> bool:
    if meta.get("indication") != indication or meta.get("country") != country:
        return False
    if age == "adults" and not meta["age"] > 18:
        return False
    if age == "children" and not meta["age"] < 18:
        return False
    if since is not None and meta["year"] < since:
        return False
    return True


def hybrid_eval_set(seed: int = 7, n_docs: int = 200) -> EvalSet:
    rng = random.Random(seed)
    raw: list[dict] = []
    queries: list[LabelledQuery] = []

    def add(text: str, meta: dict) -> str:
        doc_id = f"doc{len(raw):04d}"
        raw.append({"id": doc_id, "text": text, "metadata": meta})
        return doc_id

    for drug, cue in DRUGS:
        ids = []
        for _ in range(3):
            words = _filler(rng).split()
            words.insert(rng.randrange(len(words) + 1), drug)
            if rng.random() < 0.7:
                words.insert(rng.randrange(len(words) + 1), cue)
            ids.append(add(" ".join(words), _meta(rng, rng.choice(BACKGROUND_INDICATIONS))))
        queries.append(LabelledQuery(f"{drug} {cue}", frozenset(ids), "keyword"))

    for canonical, alternative, indication in SYNONYM_PAIRS:
        ids = [add(f"{alternative} {_filler(rng)} {alternative}", _meta(rng, indication)) for _ in range(3)]
        queries.append(LabelledQuery(canonical, frozenset(ids), "synonym"))
    for text in SYNONYM_DISTRACTORS:
        add(f"{text} {_filler(rng)}", _meta(rng, None))

    templates = (
        ("{ind} in adults in {country} since {year}", "adults", True),
        ("{ind} in children in {country}", "children", False),
        ("{ind} in {country} since {year}", None, True),
        ("{ind} in adults in {country}", "adults", False),
    )
    for i, indication in enumerate(META_INDICATIONS):
        template, age, with_year = templates[i % len(templates)]
        country = META_COUNTRIES[i % len(META_COUNTRIES)]
        since = 2019 + i % 4 if with_year else None
        ids = []
        for j in range(14):
            meta = _meta(rng, indication)
            if j < 4:
                # guaranteed matches
                meta["country"] = country
                meta["age"] = rng.randint(25, 70) if age != "children" else rng.randint(4, 15)
                if since is not None:
                    meta["year"] = rng.randint(since, 2024)
            elif j < 10:
                # same country in the text, wrong metadata
                meta["country"] = rng.choice([c for c in META_COUNTRIES if c != country])
            mention = country if j >= 4 else rng.choice(META_COUNTRIES)
            text = f"{indication} {_filler(rng, 5, 9)} {mention} {_filler(rng, 3, 6)}"
            if rng.random() < 0.5:
                text += f" {rng.choice(['adults', 'children', 'patients'])} {rng.randint(2012, 2024)}"
            doc_id = add(text, meta)
            if _satisfies(meta, indication, country, age, since):
                ids.append(doc_id)
        query = template.format(ind=indication, country=country, year=since)
        queries.append(LabelledQuery(query, frozenset(ids), "metadata"))

    while len(raw) < n_docs:
        add(_filler(rng, 10, 18), _meta(rng, rng.choice(BACKGROUND_INDICATIONS)))

    synonyms = {canonical: [alternative] for canonical, alternative, _ in SYNONYM_PAIRS}
    corpus = tuple(validate_document(r) for r in raw[:n_docs])
    return EvalSet(corpus, tuple(queries), synonyms)


def desk_corpus() -> list[Document]:
    """The three-document corpus used throughout the examples and tests."""
    return [
        validate_document({"id": "d1", "text": "lung cancer treatment"}),
        validate_document({"id": "d2", "text": "cancer research in india", "metadata": {"country": "India"}}),
        validate_document({"id": "d3", "text": "heart disease"}),
    ]
