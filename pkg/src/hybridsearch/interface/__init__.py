"""CLI, HTTP service and evaluation harness."""

from .evaluation import EvalCase, EvalReport, load_cases, recall_at_k, reciprocal_rank, run_eval
from .http import http_search, make_server

__all__ = [
    "EvalCase",
    "EvalReport",
    "http_search",
    "load_cases",
    "make_server",
    "recall_at_k",
    "reciprocal_rank",
    "run_eval",
]
