"""Scripted in-process adapter server for tests and offline runs.

The server answers the adapter protocol with behavior supplied as a plain
function from request dict to (status, response dict); the response id is
filled in automatically unless the behavior already set one. Factories for
the common behaviors (echo, fixed-record, deterministic edit) live here so
the full primary test suite runs without any neural dependency.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

Behavior = Callable[[dict], tuple[int, dict]]


def echo_behavior(logq: float = -1.0) -> Behavior:
    """Always propose the input unchanged; identity equals forward."""

    def behave(req: dict) -> tuple[int, dict]:
        op = req.get("op")
        if op == "propose":
            return 200, {"text": req["text"], "logq_forward": logq,
                         "logq_reverse": logq, "logq_identity": logq}
        if op == "score":
            return 200, {"logq": logq}
        if op == "energy":
            return 200, {"energy": 0.0}
        return 400, {"error": f"unknown op {op!r}"}

    return behave


def scripted_behavior(responses: dict[str, dict], status: int = 200) -> Behavior:
    """Return a fixed response dict per op; useful for contract tests."""

    def behave(req: dict) -> tuple[int, dict]:
        op = req.get("op")
        if op in responses:
            return status, dict(responses[op])
        return 400, {"error": f"unscripted op {op!r}"}

    return behave


def rot_edit_behavior(rotation: dict[str, str], logq_edit: float = -2.0,
                      logq_identity: float = -0.5) -> Behavior:
    """Deterministically rewrite tokens through a substitution table.

    Tokens found in ``rotation`` are replaced; proposals are the fully
    rewritten sentence. Fixed log-probabilities keep the record well-formed
    without claiming to be a real distribution; fine for plumbing tests.
    """

    def rewrite(text: str) -> str:
        return " ".join(rotation.get(t, t) for t in text.split())

    def behave(req: dict) -> tuple[int, dict]:
        op = req.get("op")
        if op == "propose":
            out = rewrite(req["text"])
            identical = out == req["text"]
            lq = logq_identity if identical else logq_edit
            return 200, {"text": out, "logq_forward": lq,
                         "logq_reverse": logq_edit, "logq_identity": logq_identity}
        if op == "score":
            return 200, {"logq": logq_edit}
        if op == "energy":
            return 200, {"energy": float(len(req.get("text", "").split()))}
        return 400, {"error": f"unknown op {op!r}"}

    return behave


class MockAdapterServer:
    """Context-managed HTTP server bound to an ephemeral localhost port."""

    def __init__(self, behavior: Behavior | None = None, delay: float = 0.0):
        self.behavior = behavior or echo_behavior()
        self.delay = delay
        self.requests: list[dict] = []
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1/adapter"

    def start(self) -> "MockAdapterServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length).decode("utf-8")
                try:
                    req = json.loads(raw)
                except ValueError:
                    self._reply(400, {"error": "request is not valid JSON"})
                    return
                outer.requests.append(req)
                if outer.delay:
                    time.sleep(outer.delay)
                if self.path != "/v1/adapter":
                    self._reply(404, {"error": f"no such path {self.path}"})
                    return
                status, resp = outer.behavior(req)
                resp.setdefault("id", req.get("id"))
                self._reply(status, resp)

            def _reply(self, status: int, obj: dict):
                body = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):  # silence stderr chatter
                pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self) -> "MockAdapterServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
