"""
From a natural-language request to a metadata filter
====================================================

The structurer asks an LLM for a JSON filter and falls back to a gazetteer
when the model is unavailable or answers with something unusable.
"""

from hybridsearch.structured import parse_structured_query, serialize_structured_query
from hybridsearch.structurer import (
    GazetteerLLM,
    Lexicons,
    PromptTemplate,
    build_prompt,
    llm_structure,
    rule_based_extract,
)

lex = Lexicons.default()
template = PromptTemplate.default()
request = "atopic dermatitis in adults in India since 2022"

# gazetteer plus year cues, no model involved
rules = rule_based_extract(request, lex)
print("rules:", serialize_structured_query(rules.query))

# the prompt embeds the request as a JSON string literal
print(build_prompt(request, template)[-80:])

# GazetteerLLM is an offline stand-in that answers like a well-behaved model
result = llm_structure(GazetteerLLM(lex), request, template, lex)
print(result.provenance, serialize_structured_query(result.query))


class Rambling:
    def complete(self, prompt):
        return "Sure! Here is a filter: {\"colour\": \"blue\"}"


# a field outside the schema is rejected and the gazetteer result is used
result = llm_structure(Rambling(), request, template, lex)
print(result.provenance, result.diagnostics[0])

# the query dialect round-trips through canonical JSON
q = parse_structured_query('{"year": {"$gte": 2020, "$lt": 2024}, "country": "Brazil"}')
print(serialize_structured_query(q))
