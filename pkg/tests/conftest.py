import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridsearch import AnalyzerConfig, build_engine, validate_document  # noqa: E402
from hybridsearch.synthetic import desk_corpus  # noqa: E402


@pytest.fixture
def desk():
    return desk_corpus()


@pytest.fixture
def synonyms():
    return AnalyzerConfig.build(synonyms={"lung cancer": ["lung carcinoma"]})


@pytest.fixture
def small_engine(synonyms):
    docs = desk_corpus() + [
        validate_document(
            {
                "id": "d4",
                "text": "outcomes of lung carcinoma resection",
                "metadata": {"indication": "lung cancer", "country": "India", "year": 2023, "age": 54},
            }
        ),
        validate_document(
            {
                "id": "d5",
                "text": "atopic dermatitis registry",
                "metadata": {"indication": "atopic dermatitis", "country": "India", "year": 2022, "age": 30},
            }
        ),
    ]
    return build_engine(docs, synonyms)


class _StubHandler(BaseHTTPRequestHandler):
    reply = None  # callable(body: dict) -> (status, bytes), bound per server

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        status, data = type(self).reply(body)
        self.send_response(status)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    """Start a local HTTP stub; ``stub_server(reply)`` returns its URL."""
    servers = []

    def start(reply):
        handler = type("Bound", (_StubHandler,), {"reply": staticmethod(reply)})
        server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        server.daemon_threads = True
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}/"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


@pytest.fixture(scope="session")
def eval_set():
    from hybridsearch.synthetic import hybrid_eval_set

    return hybrid_eval_set()


@pytest.fixture(scope="session")
def eval_engine(eval_set):
    return build_engine(eval_set.corpus, AnalyzerConfig.build(synonyms=eval_set.synonyms))


@pytest.fixture(scope="session")
def engine_dir(tmp_path_factory, eval_set):
    """An engine directory built through the CLI from the synthetic corpus."""
    from hybridsearch.core import write_corpus_jsonl
    from hybridsearch.interface.cli import main

    root = tmp_path_factory.mktemp("cli")
    write_corpus_jsonl(root / "corpus.jsonl", eval_set.corpus)
    (root / "synonyms.json").write_text(json.dumps(eval_set.synonyms), encoding="utf-8")
    assert main(["index", "--corpus", str(root / "corpus.jsonl"), "--synonyms", str(root / "synonyms.json"), "--out", str(root / "engine")]) == 0
    return root / "engine"


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
