"""Read-only JSON search service on the standard library HTTP server.

``POST /search`` takes ``{"query": ..., "mode": "full", "k": 10}`` and
answers with the same document the CLI prints for ``query --json``.
``GET /healthz`` is 200 once an engine has been published, 503 before.
"""

from __future__ import annotations

import json
import logging
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable

from ..errors import NotReady, UnknownMode
from ..pipeline import EngineHandle, SearchMode, SearchRequest, load_engine, search

logger = logging.getLogger(__name__)

MAX_BODY = 1 << 20


def _error(status: HTTPStatus, code: str, message: str) -> tuple[int, dict[str, Any]]:
    return int(status), {"error": code, "message": message}


def http_search(handle: EngineHandle, body: bytes) -> tuple[int, dict[str, Any]]:
    """Handle one ``/search`` body; returns ``(status, json_document)``."""
    if not handle.ready:
        return _error(HTTPStatus.SERVICE_UNAVAILABLE, "NotReady", "engine is not loaded")
    try:
        payload = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        return _error(HTTPStatus.BAD_REQUEST, "MalformedBody", f"body is not JSON: {exc}")
    if not isinstance(payload, dict):
        return _error(HTTPStatus.BAD_REQUEST, "MalformedBody", "body must be a JSON object")
    try:
        mode = SearchMode.parse(payload.get("mode", "full"))
    except UnknownMode as exc:
        return _error(HTTPStatus.BAD_REQUEST, "UnknownMode", str(exc))
    query = payload.get("query")
    k = payload.get("k", 10)
    per_path_k = payload.get("per_path_k")
    try:
        req = SearchRequest(query, mode, k, per_path_k)
    except (ValueError, TypeError) as exc:
        return _error(HTTPStatus.BAD_REQUEST, "BadRequest", str(exc))
    try:
        response = search(handle.get(), req)
    except NotReady as exc:
        return _error(HTTPStatus.SERVICE_UNAVAILABLE, "NotReady", str(exc))
    return int(HTTPStatus.OK), response.to_dict()


class SearchHandler(BaseHTTPRequestHandler):
    handle_ref: EngineHandle  # set on the subclass built by make_server
    server_version = "hybridsearch/0.1"

    def _send(self, status: int, doc: dict[str, Any]) -> None:
        data = json.dumps(doc, ensure_ascii=False, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            if self.handle_ref.ready:
                self._send(200, {"status": "ok"})
            else:
                self._send(503, {"status": "loading"})
        else:
            self._send(*_error(HTTPStatus.NOT_FOUND, "NotFound", self.path))

    def do_POST(self) -> None:
        if self.path != "/search":
            self._send(*_error(HTTPStatus.NOT_FOUND, "NotFound", self.path))
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = -1
        if length < 0 or length > MAX_BODY:
            self._send(*_error(HTTPStatus.BAD_REQUEST, "MalformedBody", "bad Content-Length"))
            return
        self._send(*http_search(self.handle_ref, self.rfile.read(length)))

    def log_message(self, format: str, *args: Any) -> None:
        logger.info("%s - %s", self.address_string(), format % args)


def make_server(handle: EngineHandle, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundSearchHandler", (SearchHandler,), {"handle_ref": handle})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve(
    engine_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8080,
    loader: Callable[[str | Path], Any] | None = None,
) -> None:
    """Serve ``engine_dir``; the listener starts at once and answers 503 until loading finishes."""
    handle = EngineHandle()
    server = make_server(handle, host, port)

    def load() -> None:
        handle.publish((loader or load_engine)(engine_dir))
        logger.info("engine %s ready", engine_dir)

    threading.Thread(target=load, daemon=True).start()
    try:
        server.serve_forever()
    finally:
        server.server_close()
