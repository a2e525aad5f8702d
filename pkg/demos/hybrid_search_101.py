"""
Hybrid search on a three-document corpus
========================================

Keyword, semantic and structured retrieval each produce a ranked list;
Reciprocal Rank Fusion merges them.
"""

from hybridsearch import AnalyzerConfig, SearchMode, SearchRequest, build_engine, search
from hybridsearch.core import validate_document
from hybridsearch.synthetic import desk_corpus

# the desk corpus plus one document that only says "lung carcinoma"
docs = desk_corpus() + [
    validate_document(
        {
            "id": "d4",
            "text": "outcomes of lung carcinoma resection",
            "metadata": {"indication": "lung cancer", "country": "India", "year": 2023, "age": 54},
        }
    )
]
analyzer = AnalyzerConfig.build(synonyms={"lung cancer": ["lung carcinoma"]})
engine = build_engine(docs, analyzer)

query = "lung cancer in India"
response = search(engine, SearchRequest(query, SearchMode.FULL, k=5))

print("structured query:", response.structured_query.to_obj())
for name, ranked in response.path_lists.items():
    print(f"{name:>10}:", [(item.doc_id, round(item.score, 4)) for item in ranked])

# fused scores are sums of 1 / (rank + 60) over the lists containing a document
print("     fused:", [(item.doc_id, round(item.score, 5)) for item in response.results])

# FAST skips the LLM and the structured path entirely
fast = search(engine, SearchRequest(query, SearchMode.FAST, k=5))
print("      fast:", fast.results.ids())
