"""Command-line entry point: ``hybridsearch index|query|serve|eval|fuse-debug``.

Exit status is 0 on success, 1 for usage errors and 2 for runtime errors.
Provider settings (LLM_ENDPOINT, LLM_API_KEY, EMBED_ENDPOINT, EMBED_API_KEY)
come from an optional ``--config`` JSON file, overridden by the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..analysis import AnalyzerConfig, load_stopwords, load_synonyms
from ..core import RankedList, ScoredDoc
from ..errors import HybridSearchError
from ..fusion import DEFAULT_C, FusionConfig, rank_positions, rrf_fuse, rrf_scores
from ..keyword import BM25Params
from ..pipeline import SearchMode, SearchRequest, ingest, load_engine, save_engine, search
from ..structurer import GazetteerLLM, HttpLLMClient, Lexicons, PromptTemplate
from ..vectors import HashingEmbedder, RemoteEmbedder
from .evaluation import load_cases, run_eval

SETTING_KEYS = ("LLM_ENDPOINT", "LLM_API_KEY", "EMBED_ENDPOINT", "EMBED_API_KEY")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def resolve_settings(config_path: str | None, env: Mapping[str, str] | None = None) -> dict[str, str]:
    env = os.environ if env is None else env
    settings: dict[str, str] = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            data = json.load(fh)
        settings.update({k: str(v) for k, v in data.items() if k in SETTING_KEYS and v is not None})
    settings.update({k: env[k] for k in SETTING_KEYS if env.get(k)})
    return settings


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridsearch", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with provider settings (environment wins)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build an engine directory from a JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--synonyms", help="JSON object: phrase -> [phrases]")
    p.add_argument("--stopwords", help="one stopword per line")
    p.add_argument("--lexicons", help="gazetteer JSON (indications, countries, age_groups)")
    p.add_argument("--prompt", help="prompt template with {{query}} and {{schema}}")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--embedder", choices=("hashing", "remote"), default="hashing")
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--rrf-c", type=float, default=DEFAULT_C)
    p.add_argument("--strict", action="store_true", help="abort on the first invalid line")

    p = sub.add_parser("query", help="search an engine directory")
    p.add_argument("--engine", required=True)
    p.add_argument("--mode", default="full", choices=[m.value for m in SearchMode])
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--per-path-k", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("--timings", action="store_true", help="include per-path latency in --json output")
    p.add_argument("text")

    p = sub.add_parser("serve", help="serve an engine directory over HTTP")
    p.add_argument("--engine", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)

    p = sub.add_parser("eval", help="recall@k and MRR over labelled cases")
    p.add_argument("--engine", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--mode", choices=[m.value for m in SearchMode], help="override every case's mode")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("fuse-debug", help="dump rank vectors and RRF scores for ranked lists")
    p.add_argument("--lists", required=True, help="JSON file: array of ranked lists")
    p.add_argument("--c", type=float, default=DEFAULT_C)
    p.add_argument("-k", type=int)
    return parser


def _llm_client(settings: Mapping[str, str], lexicons: Lexicons):
    client = HttpLLMClient.from_env(settings)
    return client if client is not None else GazetteerLLM(lexicons)


def _load(args: argparse.Namespace, settings: Mapping[str, str]):
    embedder = None
    manifest = json.loads((Path(args.engine) / "manifest.json").read_text(encoding="utf-8"))
    if manifest["embedder"]["kind"] == "remote":
        embedder = RemoteEmbedder.from_env(manifest["embedder"].get("dim"), settings)
    engine = load_engine(args.engine, embedder=embedder)
    return engine.with_llm(_llm_client(settings, engine.lexicons))


def cmd_index(args: argparse.Namespace, settings: Mapping[str, str]) -> int:
    analyzer = AnalyzerConfig.build(
        stopwords=load_stopwords(args.stopwords) if args.stopwords else (),
        synonyms=load_synonyms(args.synonyms) if args.synonyms else None,
    )
    if args.embedder == "remote":
        embedder = RemoteEmbedder.from_env(args.dim, settings)
    else:
        embedder = HashingEmbedder(args.dim, analyzer)
    lexicons = Lexicons.load(args.lexicons) if args.lexicons else Lexicons.default()
    template = PromptTemplate.load(args.prompt, lexicons.fields) if args.prompt else PromptTemplate.default(lexicons.fields)
    engine, warnings = ingest(
        args.corpus,
        analyzer,
        embedder,
        BM25Params(args.k1, args.b),
        strict=args.strict,
        lexicons=lexicons,
        template=template,
        fusion_c=args.rrf_c,
    )
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    save_engine(engine, args.out)
    print(f"indexed {engine.doc_count} documents into {args.out}")
    return EXIT_OK


def _table(results: RankedList) -> str:
    lines = [f"{'rank':>4}  {'score':>10}  id"]
    for rank, item in enumerate(results, start=1):
        lines.append(f"{rank:>4}  {item.score:>10.6f}  {item.doc_id}")
    return "\n".join(lines)


def cmd_query(args: argparse.Namespace, settings: Mapping[str, str]) -> int:
    try:
        req = SearchRequest(args.text, SearchMode.parse(args.mode), args.k, args.per_path_k)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    response = search(_load(args, settings), req)
    if args.json:
        print(response.to_json(include_timings=args.timings))
        return EXIT_OK
    if response.structured_query is not None:
        print(f"structured query: {json.dumps(response.structured_query.to_obj(), ensure_ascii=False)}")
    for name, diag in response.paths.items():
        status = diag.error or "ok"
        print(f"{name:>10}: {diag.size} hits, {diag.elapsed_ms:.1f} ms, {status}")
    print(_table(response.results))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, settings: Mapping[str, str]) -> int:
    from .http import serve

    print(f"serving {args.engine} on http://{args.host}:{args.port}", file=sys.stderr)
    serve(args.engine, args.host, args.port, loader=lambda _: _load(args, settings))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: Mapping[str, str]) -> int:
    report = run_eval(_load(args, settings), load_cases(args.cases), args.mode)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
        return EXIT_OK
    for res in report.cases:
        print(f"{res.case.mode.value:>10}  R@{res.case.k}={res.recall:.3f}  RR={res.reciprocal_rank:.3f}  {res.case.query}")
    for mode, agg in report.by_mode().items():
        print(f"{mode}: {agg['cases']} cases, mean recall {agg['recall']:.4f}, MRR {agg['mrr']:.4f}")
    return EXIT_OK


def _ranked_from_json(obj: Any, position: int) -> RankedList:
    """Accept ``["d1", "d2"]``, ``[{"id": ..., "score": ...}]`` or ``{"label": ..., "results": [...]}``."""
    label = f"list{position}"
    if isinstance(obj, dict):
        label = str(obj.get("label", label))
        obj = obj.get("results", obj.get("ids", []))
    if not isinstance(obj, list):
        raise HybridSearchError(f"list {position}: expected an array")
    n = len(obj)
    items = []
    for rank, entry in enumerate(obj, start=1):
        doc_id = entry.get("id") if isinstance(entry, dict) else entry
        if not isinstance(doc_id, str):
            raise HybridSearchError(f"list {position}: entry {rank} has no string id")
        # order is what matters to fusion; synthesize strictly decreasing scores
        items.append(ScoredDoc(doc_id, float(n - rank + 1)))
    return RankedList(tuple(items), label)


def cmd_fuse_debug(args: argparse.Namespace, settings: Mapping[str, str]) -> int:
    with open(args.lists, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise HybridSearchError("--lists must hold a JSON array of ranked lists")
    lists = [_ranked_from_json(obj, i) for i, obj in enumerate(raw)]
    positions = rank_positions(lists)
    k = args.k if args.k else max(1, len(positions))
    fused = rrf_fuse(lists, FusionConfig(args.c, k))
    doc = {
        "c": args.c,
        "labels": [ranked.source_label for ranked in lists],
        "ranks": {d: positions[d] for d in sorted(positions)},
        "scores": dict(sorted(rrf_scores(positions, args.c).items())),
        "fused": [{"id": it.doc_id, "score": it.score, "rank": r} for r, it in enumerate(fused, start=1)],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "index": cmd_index,
    "query": cmd_query,
    "serve": cmd_serve,
    "eval": cmd_eval,
    "fuse-debug": cmd_fuse_debug,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = resolve_settings(args.config)
        return COMMANDS[args.command](args, settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HybridSearchError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
