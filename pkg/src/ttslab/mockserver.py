"""Deterministic chat-completions mock with SSE streaming.

Scripted responses keyed by prompt; every emitted token lands in an emission
log so tests can audit billed counts, including what leaked out after a
client disconnect. Parallel requests for the same key are served the scripted
responses in arrival order (wrapping around).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"
EMISSIONS_PATH = "/__emissions__"
RESET_PATH = "/__reset__"


@dataclass(frozen=True)
class ScriptedResponse:
    tokens: tuple[str, ...]
    delay: float  # seconds between tokens

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("per-token delay must be >= 0")


class MockScript:
    """Prompt key -> list of scripted responses."""

    def __init__(self, responses: dict[str, list[ScriptedResponse]]) -> None:
        if not responses:
            raise ValueError("script must define at least one prompt key")
        self.responses = responses

    @classmethod
    def from_dict(cls, data: object) -> "MockScript":
        if not isinstance(data, dict):
            raise ValueError("script must be a JSON object of prompt keys")
        responses: dict[str, list[ScriptedResponse]] = {}
        for key, entries in data.items():
            if not isinstance(entries, list) or not entries:
                raise ValueError(f"script key {key!r} needs a nonempty response list")
            parsed = []
            for entry in entries:
                if not isinstance(entry, dict) or "tokens" not in entry:
                    raise ValueError(f"script key {key!r}: each response needs 'tokens'")
                tokens = entry["tokens"]
                if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
                    raise ValueError(f"script key {key!r}: tokens must be a list of strings")
                parsed.append(
                    ScriptedResponse(tuple(tokens), float(entry.get("delay", 0.0)))
                )
            responses[str(key)] = parsed
        return cls(responses)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockScript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def match(self, prompt: str) -> str | None:
        """Exact key match first, then longest substring key (ties: smallest)."""
        if prompt in self.responses:
            return prompt
        hits = [key for key in self.responses if key in prompt]
        if not hits:
            return None
        return sorted(hits, key=lambda k: (-len(k), k))[0]


class MockServer:
    """A running threaded HTTP server; use as a context manager or call close()."""

    def __init__(self, script: MockScript, host: str = "127.0.0.1", port: int = 0) -> None:
        self.script = script
        self._lock = threading.Lock()
        self._counters: dict[str, int] = {}
        self._emissions: list[dict] = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # silence request logging
                pass

            def do_POST(self) -> None:
                # Always drain the body, or a kept-alive connection misparses
                # the leftover bytes as the next request line.
                length = int(self.headers.get("Content-Length", "0") or 0)
                raw = self.rfile.read(length) if length > 0 else b""
                if self.path == CHAT_COMPLETIONS_PATH:
                    server._handle_completion(self, raw)
                elif self.path == RESET_PATH:
                    server.reset()
                    _send_json(self, 200, {"ok": True})
                else:
                    _send_json(self, 404, _error_body(f"no such path {self.path}"))

            def do_GET(self) -> None:
                if self.path == EMISSIONS_PATH:
                    _send_json(self, 200, server.emissions())
                else:
                    _send_json(self, 404, _error_body(f"no such path {self.path}"))

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host = self._httpd.server_address[0]
        return f"http://{host}:{self.port}"

    def start(self) -> "MockServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_blocking(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> "MockServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.close()

    def emissions(self) -> list[dict]:
        with self._lock:
            return [dict(e) for e in self._emissions]

    def emitted_tokens(self) -> int:
        with self._lock:
            return sum(e["emitted"] for e in self._emissions)

    def reset(self) -> None:
        with self._lock:
            self._emissions.clear()
            self._counters.clear()

    # request handling -----------------------------------------------------

    def _next_response(self, key: str) -> tuple[int, ScriptedResponse]:
        with self._lock:
            index = self._counters.get(key, 0)
            self._counters[key] = index + 1
        entries = self.script.responses[key]
        return index, entries[index % len(entries)]

    def _handle_completion(self, handler: BaseHTTPRequestHandler, raw: bytes) -> None:
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            _send_json(handler, 400, _error_body("request body is not valid JSON"))
            return
        messages = body.get("messages")
        if not isinstance(messages, list) or not messages:
            _send_json(handler, 400, _error_body("messages must be a nonempty list"))
            return
        if body.get("stream") is not True:
            _send_json(handler, 400, _error_body("this mock only serves stream=true"))
            return
        prompt = str(messages[-1].get("content", ""))
        key = self.script.match(prompt)
        if key is None:
            _send_json(handler, 404, _error_body("unknown prompt key"))
            return

        index, scripted = self._next_response(key)
        cap = body.get("max_tokens")
        tokens = scripted.tokens
        finish_reason = "stop"
        if isinstance(cap, int) and 0 < cap < len(tokens):
            tokens = tokens[:cap]
            finish_reason = "length"

        record = {
            "key": key,
            "response_index": index,
            "emitted": 0,
            "completed": False,
        }
        with self._lock:
            self._emissions.append(record)

        completion_id = f"chatcmpl-{uuid.uuid4().hex[:12]}"
        model = str(body.get("model", "mock"))
        handler.send_response(200)
        handler.send_header("Content-Type", "text/event-stream")
        handler.send_header("Cache-Control", "no-cache")
        handler.send_header("Connection", "close")
        handler.end_headers()
        try:
            for token in tokens:
                if scripted.delay:
                    time.sleep(scripted.delay)
                _write_sse(handler, _delta_chunk(completion_id, model, token))
                with self._lock:
                    record["emitted"] += 1
            _write_sse(handler, _finish_chunk(completion_id, model, finish_reason, record["emitted"]))
            handler.wfile.write(b"data: [DONE]\n\n")
            handler.wfile.flush()
            with self._lock:
                record["completed"] = True
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass  # client cancelled mid-stream; emission count stands as billed
        finally:
            handler.close_connection = True  # SSE body has no length framing


def _delta_chunk(completion_id: str, model: str, token: str) -> dict:
    return {
        "id": completion_id,
        "object": "chat.completion.chunk",
        "model": model,
        "choices": [{"index": 0, "delta": {"content": token}, "finish_reason": None}],
    }


def _finish_chunk(completion_id: str, model: str, reason: str, emitted: int) -> dict:
    return {
        "id": completion_id,
        "object": "chat.completion.chunk",
        "model": model,
        "choices": [{"index": 0, "delta": {}, "finish_reason": reason}],
        "usage": {
            "prompt_tokens": 0,
            "completion_tokens": emitted,
            "total_tokens": emitted,
        },
    }


def _write_sse(handler: BaseHTTPRequestHandler, payload: dict) -> None:
    handler.wfile.write(b"data: " + json.dumps(payload).encode("utf-8") + b"\n\n")
    handler.wfile.flush()


def _error_body(message: str) -> dict:
    return {"error": {"message": message, "type": "invalid_request_error"}}


def _send_json(handler: BaseHTTPRequestHandler, status: int, payload: object) -> None:
    data = json.dumps(payload).encode("utf-8")
    handler.send_response(status)
    handler.send_header("Content-Type", "application/json")
    handler.send_header("Content-Length", str(len(data)))
    handler.end_headers()
    try:
        handler.wfile.write(data)
    except (BrokenPipeError, ConnectionResetError, OSError):
        pass


def serve_mock(script: str | Path | MockScript, port: int = 0, host: str = "127.0.0.1") -> MockServer:
    """Load a script file (or take a prebuilt script) and start the server."""
    if not isinstance(script, MockScript):
        script = MockScript.from_file(script)
    return MockServer(script, host=host, port=port).start()
