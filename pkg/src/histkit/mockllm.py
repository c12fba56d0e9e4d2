"""In-process mock of the OpenAI-compatible chat/embeddings HTTP protocol.

Serves deterministic fake translations and embeddings for tests, demos, and
offline pipeline smoke runs. Failure injection covers the retry paths: the
first `fail_first` chat requests either return HTTP 500 ("http" mode) or a
well-formed envelope whose content is unparseable ("garbage" mode).
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_LANG_KEY = re.compile(r'"lb": "lb_sent1", "([a-z]{2})"')


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENT_SPLIT.split(text.strip()) if s]


def fake_translation(sentence: str, lang: str) -> str:
    return f"[{lang}] {sentence}"


def stub_vector(text: str, dim: int) -> list[float]:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32).tolist()


class MockLLMServer:
    """Threaded localhost server; use as a context manager or start()/stop()."""

    def __init__(self, fail_first: int = 0, fail_mode: str = "http", embed_dim: int = 8):
        if fail_mode not in ("http", "garbage"):
            raise ValueError("fail_mode must be 'http' or 'garbage'")
        self.fail_first = fail_first
        self.fail_mode = fail_mode
        self.embed_dim = embed_dim
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def n_requests(self) -> int:
        with self._lock:
            return len(self.requests)

    @property
    def n_chat_requests(self) -> int:
        with self._lock:
            return sum(1 for r in self.requests if r["path"].endswith("/chat/completions"))

    @property
    def url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self) -> "MockLLMServer":
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, payload) -> None:
                body = payload if isinstance(payload, bytes) else json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    payload = {}
                with server._lock:
                    server.requests.append({"path": self.path, "payload": payload})
                    chat_seen = sum(1 for r in server.requests if r["path"].endswith("/chat/completions"))

                if self.path.endswith("/chat/completions"):
                    if chat_seen <= server.fail_first:
                        if server.fail_mode == "http":
                            self._send(500, {"error": "injected failure"})
                        else:
                            self._send(
                                200,
                                {"choices": [{"message": {"content": "％ not the instructed format ％"}}]},
                            )
                        return
                    self._send(200, server._chat_response(payload))
                elif self.path.endswith("/embeddings"):
                    self._send(200, server._embeddings_response(payload))
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self) -> "MockLLMServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _chat_response(self, payload: dict) -> dict:
        messages = payload.get("messages", [])
        system = next((m.get("content", "") for m in messages if m.get("role") == "system"), "")
        user = next((m.get("content", "") for m in messages if m.get("role") == "user"), "")
        m = _LANG_KEY.search(system)
        lang = m.group(1) if m else "de"
        items = [{"lb": s, lang: fake_translation(s, lang)} for s in split_sentences(user)]
        content = json.dumps({"translation": items}, ensure_ascii=False)
        return {
            "object": "chat.completion",
            "model": payload.get("model", "mock"),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
        }

    def _embeddings_response(self, payload: dict) -> dict:
        inputs = payload.get("input", [])
        if isinstance(inputs, str):
            inputs = [inputs]
        data = [
            {"object": "embedding", "index": i, "embedding": stub_vector(text, self.embed_dim)}
            for i, text in enumerate(inputs)
        ]
        return {"object": "list", "model": payload.get("model", "mock"), "data": data}
