import dataclasses
import json

import pytest

from hybridsearch.core import write_corpus_jsonl
from hybridsearch.errors import FormatVersionError, NotReady, UnknownMode, ValidationError
from hybridsearch.fusion import FusionConfig, rrf_fuse
from hybridsearch.pipeline import (
    EngineHandle,
    SearchMode,
    SearchRequest,
    build_engine,
    ingest,
    load_engine,
    save_engine,
    search,
)
from hybridsearch.synthetic import desk_corpus, hybrid_eval_set

EXAMPLE_NL = "atopic dermatitis in adults in India since 2022"


class Counting:
    def __init__(self, inner=None, fail=False):
        self.inner, self.fail, self.calls = inner, fail, 0

    def complete(self, prompt):
        self.calls += 1
        if self.fail:
            raise TimeoutError("simulated outage")
        return self.inner.complete(prompt)


class TestRequest:
    def test_defaults(self):
        req = SearchRequest("q")
        assert (req.mode, req.k, req.per_path_k) == (SearchMode.FULL, 10, 50)
        assert SearchRequest("q", k=80).per_path_k == 80

    @pytest.mark.parametrize("kwargs", [{"query": ""}, {"query": "q", "k": 0}, {"query": "q", "k": 5, "per_path_k": 2}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SearchRequest(**kwargs)

    def test_unknown_mode(self):
        with pytest.raises(UnknownMode):
            SearchRequest("q", "hybrid")


class TestSearch:
    def test_not_ready(self):
        with pytest.raises(NotReady):
            search(None, SearchRequest("q"))

    def test_full_is_rrf_of_the_three_lists(self, small_engine):
        resp = search(small_engine, SearchRequest("lung cancer in India", k=5))
        assert set(resp.path_lists) == {"structured", "keyword", "semantic"}
        expected = rrf_fuse(list(resp.path_lists.values()), FusionConfig(60, 5))
        assert resp.results == expected
        assert resp.structured_query.to_obj() == {"indication": "lung cancer", "country": "India"}
        assert resp.path_lists["structured"].ids() == ["d4"]

    def test_synonym_doc_found_by_keyword(self, small_engine):
        resp = search(small_engine, SearchRequest("lung cancer", SearchMode.KEYWORD_ONLY))
        assert "d4" in resp.results.ids()

    def test_single_path_modes_truncate_to_k(self, small_engine):
        for mode in (SearchMode.KEYWORD_ONLY, SearchMode.SEMANTIC_ONLY, SearchMode.STRUCTURED_ONLY):
            resp = search(small_engine, SearchRequest("India", mode, k=1))
            assert list(resp.paths) == [mode.value]
            assert len(resp.results) <= 1

    def test_no_match_keyword_only(self, small_engine):
        resp = search(small_engine, SearchRequest("zebra", SearchMode.KEYWORD_ONLY))
        assert len(resp.results) == 0 and resp.paths["keyword"].error is None

    def test_top3_of_two_paths_reaches_fused_top_k(self, eval_engine, eval_set):
        for q in eval_set.queries:
            resp = search(eval_engine, SearchRequest(q.query, k=10))
            heads = [set(ranked.ids()[:3]) for ranked in resp.path_lists.values()]
            shared = {d for d in set().union(*heads) if sum(d in h for h in heads) >= 2}
            assert shared <= set(resp.results.ids())

    def test_fast_makes_no_llm_calls(self, small_engine):
        counter = Counting(small_engine.llm)
        engine = small_engine.with_llm(counter)
        resp = search(engine, SearchRequest(EXAMPLE_NL, SearchMode.FAST))
        assert counter.calls == 0
        assert set(resp.paths) == {"keyword", "semantic"}
        assert resp.structurer is None
        search(engine, SearchRequest(EXAMPLE_NL, SearchMode.FULL))
        assert counter.calls == 1

    def test_llm_outage_degrades_to_fast(self, small_engine):
        engine = small_engine.with_llm(Counting(fail=True))
        full = search(engine, SearchRequest(EXAMPLE_NL))
        fast = search(engine, SearchRequest(EXAMPLE_NL, SearchMode.FAST))
        assert full.results.ids() == fast.results.ids()
        assert full.results.scores() == fast.results.scores()
        assert full.paths["structured"].error.startswith("ProviderUnavailable")
        assert full.structured_query is None

    def test_rule_fallback_opt_in(self, small_engine):
        engine = dataclasses.replace(small_engine, llm=Counting(fail=True), rule_fallback=True)
        resp = search(engine, SearchRequest(EXAMPLE_NL))
        assert resp.structurer.provenance == "rules"
        assert resp.path_lists["structured"].ids() == ["d5"]

    def test_failing_path_is_isolated(self, small_engine):
        class Broken:
            dim = small_engine.store.dim
            deterministic = True

            def embed(self, text):
                raise RuntimeError("embedding service down")

        engine = dataclasses.replace(small_engine, embedder=Broken())
        resp = search(engine, SearchRequest("lung cancer", SearchMode.FAST))
        assert resp.paths["semantic"].error == "RuntimeError: embedding service down"
        assert resp.results.ids() == search(engine, SearchRequest("lung cancer", SearchMode.KEYWORD_ONLY)).results.ids()

    def test_json_is_stable_without_timings(self, small_engine):
        req = SearchRequest(EXAMPLE_NL)
        a = search(small_engine, req).to_json()
        b = search(small_engine, req).to_json()
        assert a == b
        doc = json.loads(a)
        assert set(doc) == {"results", "structured_query", "diagnostics"}
        assert "elapsed_ms" not in a
        assert "elapsed_ms" in search(small_engine, req).to_json(include_timings=True)

    def test_handle(self, small_engine):
        handle = EngineHandle()
        assert not handle.ready
        with pytest.raises(NotReady):
            handle.get()
        handle.publish(small_engine)
        assert handle.ready and handle.get() is small_engine


class TestIngestAndPersistence:
    def test_ingest_lenient_and_strict(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a", "text": "lung"}\nnot json\n{"id": "", "text": "x"}\n{"id": "b", "text": "heart"}\n')
        engine, warnings = ingest(path)
        assert engine.doc_count == 2 and len(warnings) == 2
        assert warnings[0].startswith("line 2: JSONDecodeError")
        assert warnings[1].startswith("line 3: EmptyId")
        with pytest.raises(ValidationError):
            ingest(path, strict=True)

    def test_round_trip_every_mode(self, tmp_path, small_engine):
        save_engine(small_engine, tmp_path / "eng")
        loaded = load_engine(tmp_path / "eng")
        queries = ["lung cancer in India", EXAMPLE_NL, "heart", "zzz unknown"]
        for mode in SearchMode:
            for q in queries:
                req = SearchRequest(q, mode)
                assert search(loaded, req).to_json() == search(small_engine, req).to_json()

    def test_save_overwrites_atomically(self, tmp_path, small_engine):
        target = tmp_path / "eng"
        save_engine(build_engine(desk_corpus()), target)
        save_engine(small_engine, target)
        assert load_engine(target).doc_count == 5
        assert sorted(p.name for p in tmp_path.iterdir()) == ["eng"]

    def test_manifest_version_checked(self, tmp_path, small_engine):
        save_engine(small_engine, tmp_path / "eng")
        manifest = tmp_path / "eng" / "manifest.json"
        data = json.loads(manifest.read_text())
        data["version"] = 999
        manifest.write_text(json.dumps(data))
        with pytest.raises(FormatVersionError):
            load_engine(tmp_path / "eng")

    def test_corpus_file_round_trip(self, tmp_path):
        docs = list(hybrid_eval_set().corpus[:20])
        write_corpus_jsonl(tmp_path / "c.jsonl", docs)
        engine, warnings = ingest(tmp_path / "c.jsonl")
        assert warnings == [] and list(engine.corpus) == sorted(docs, key=lambda d: d.id)
