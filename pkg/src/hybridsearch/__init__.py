"""Hybrid document retrieval.

Three retrieval paths over one corpus: structured metadata filters produced
from the natural-language query (by an LLM, with a gazetteer fallback), BM25
keyword search over an inverted index, and exact cosine search over document
embeddings. Their ranked lists are merged with Reciprocal Rank Fusion.
"""

from .analysis import AnalyzerConfig, expand_query, tokenize
from .core import (
    CorpusStats,
    Document,
    RankedList,
    ScoredDoc,
    check_ranked_list,
    compute_corpus_stats,
    read_corpus_jsonl,
    validate_document,
)
from .errors import HybridSearchError
from .fusion import FusionConfig, rank_positions, rrf_fuse
from .keyword import BM25Params, InvertedIndex, bm25_score, build_index, search_keyword
from .pipeline import (
    Engine,
    EngineHandle,
    SearchMode,
    SearchRequest,
    SearchResponse,
    build_engine,
    ingest,
    load_engine,
    save_engine,
    search,
)
from .structured import (
    Op,
    Predicate,
    StructuredQuery,
    matches,
    parse_structured_query,
    search_structured,
    serialize_structured_query,
)
from .structurer import (
    GazetteerLLM,
    HttpLLMClient,
    Lexicons,
    PromptTemplate,
    StructurerResult,
    build_prompt,
    llm_structure,
    rule_based_extract,
)
from .vectors import HashingEmbedder, RemoteEmbedder, VectorStore, cosine, search_vector

__version__ = "0.1.0"

__all__ = [
    "AnalyzerConfig",
    "BM25Params",
    "CorpusStats",
    "Document",
    "Engine",
    "EngineHandle",
    "FusionConfig",
    "GazetteerLLM",
    "HashingEmbedder",
    "HttpLLMClient",
    "HybridSearchError",
    "InvertedIndex",
    "Lexicons",
    "Op",
    "Predicate",
    "PromptTemplate",
    "RankedList",
    "RemoteEmbedder",
    "ScoredDoc",
    "SearchMode",
    "SearchRequest",
    "SearchResponse",
    "StructuredQuery",
    "StructurerResult",
    "VectorStore",
    "bm25_score",
    "build_engine",
    "build_index",
    "build_prompt",
    "check_ranked_list",
    "compute_corpus_stats",
    "cosine",
    "expand_query",
    "ingest",
    "llm_structure",
    "load_engine",
    "matches",
    "parse_structured_query",
    "rank_positions",
    "read_corpus_jsonl",
    "rrf_fuse",
    "rule_based_extract",
    "save_engine",
    "search",
    "search_keyword",
    "search_structured",
    "search_vector",
    "serialize_structured_query",
    "tokenize",
    "validate_document",
]
