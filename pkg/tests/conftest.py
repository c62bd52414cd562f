import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from corpus import Corpus, make_document

TINY_LEXICON = """%
1\tposemo
2\tnegemo
%
happy\t1
sad\t2
glad\t1
"""


@pytest.fixture
def make_doc():
    counter = {"n": 0}

    def _make(text, author="whitman", source="human", genre="poem", doc_id=None):
        counter["n"] += 1
        return make_document(doc_id or f"doc-{counter['n']}", author, source, genre, text)

    return _make


@pytest.fixture
def make_corpus(make_doc):
    def _make(texts, **kwargs):
        return Corpus(tuple(make_doc(t, **kwargs) for t in texts))

    return _make


@pytest.fixture
def tiny_lexicon_path(tmp_path):
    path = tmp_path / "tiny.dic"
    path.write_text(TINY_LEXICON, encoding="utf-8")
    return path


@pytest.fixture
def separable_data():
    rng = np.random.default_rng(0)
    x0 = rng.normal(-2.0, 0.5, size=(30, 2))
    x1 = rng.normal(2.0, 0.5, size=(30, 2))
    X = np.vstack([x0, x1])
    y = np.array([0] * 30 + [1] * 30)
    return X, y


class _ChatStub:
    """미리 정한 (status, body) 응답을 차례로 돌려주는 chat-completions 스텁."""

    def __init__(self, responses, default_text="A quiet poem."):
        self.responses = list(responses)
        self.default_text = default_text
        self.requests = []
        self._lock = threading.Lock()

    def next_response(self, body):
        with self._lock:
            self.requests.append(body)
            if self.responses:
                return self.responses.pop(0)
        return 200, completion(self.default_text)


def completion(text, tokens=7):
    return {"choices": [{"message": {"role": "assistant", "content": text}}], "usage": {"total_tokens": tokens}}


@pytest.fixture
def chat_stub():
    servers = []

    def _start(responses=(), default_text="A quiet poem."):
        stub = _ChatStub(responses, default_text)

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                status, payload = stub.next_response(body)
                data = json.dumps(payload).encode("utf-8") if not isinstance(payload, bytes) else payload
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        stub.url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
        return stub

    yield _start
    for server in servers:
        server.shutdown()
        server.server_close()
