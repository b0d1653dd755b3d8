"""JSON/HTTP scoring protocol: a retrying client and a stub server around any scorer.

Request: ``POST /v1/scores`` with ``{"width", "height", "pixels"}`` where
``pixels`` is base64 of the raw row-major RGB bytes. Response:
``{"scores": [...]}`` with status 200, or 400 for malformed input.
"""
from __future__ import annotations

import base64
import json
import logging
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from ..core import as_image, validate_scores

log = logging.getLogger(__name__)

SCORES_PATH = "/v1/scores"


class TransportError(ConnectionError):
    """The server could not be reached after all retries."""


class ProtocolError(ValueError):
    """The server answered, but not with a valid score vector."""


def encode_request(image) -> bytes:
    image = as_image(image)
    h, w, _ = image.shape
    body = {"width": w, "height": h,
            "pixels": base64.b64encode(np.ascontiguousarray(image).tobytes()).decode("ascii")}
    return json.dumps(body).encode()


def decode_request(body: bytes) -> np.ndarray:
    msg = json.loads(body)
    w, h = int(msg["width"]), int(msg["height"])
    raw = base64.b64decode(msg["pixels"], validate=True)
    return as_image(np.frombuffer(raw, dtype=np.uint8), width=w, height=h)


def decode_response(body: bytes) -> np.ndarray:
    try:
        msg = json.loads(body)
        scores = msg["scores"]
        return validate_scores([float(s) for s in scores])
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"invalid score response: {exc}") from exc


@dataclass
class RemoteModel:
    """Blocking scorer that queries a remote endpoint.

    Timeouts and connection failures are retried ``retries`` times; the
    caller sees a single score request either way.
    """

    url: str
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self):
        self.url = self.url.rstrip("/")
        if not self.url.endswith(SCORES_PATH):
            self.url += SCORES_PATH
        self.attempts = 0

    def _post(self, data: bytes) -> bytes:
        req = urllib.request.Request(self.url, data=data, method="POST",
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read()

    def __call__(self, image) -> np.ndarray:
        data = encode_request(image)
        last = None
        for attempt in range(self.retries + 1):
            self.attempts += 1
            try:
                body = self._post(data)
            except urllib.error.HTTPError as exc:
                raise ProtocolError(f"server answered HTTP {exc.code}") from exc
            except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
                last = exc
                log.debug("attempt %d to %s failed: %s", attempt + 1, self.url, exc)
                continue
            return decode_response(body)
        raise TransportError(f"{self.url}: no answer after {self.retries + 1} attempts: {last}")


def remote_score(remote: RemoteModel, image) -> np.ndarray:
    return remote(image)


def _handler_for(scorer):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug(fmt, *args)

        def _reply(self, status: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path != SCORES_PATH:
                self._reply(404, {"error": "not found"})
                return
            try:
                n = int(self.headers.get("Content-Length", 0))
                image = decode_request(self.rfile.read(n))
                scores = np.asarray(scorer(image), dtype=np.float64)
            except (ValueError, KeyError, TypeError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            self._reply(200, {"scores": [float(s) for s in scores]})

    return Handler


class StubServer:
    """Threaded HTTP server exposing ``scorer`` on the scoring protocol.

    Usable as a context manager; port 0 picks a free port.
    """

    def __init__(self, scorer, host: str = "127.0.0.1", port: int = 0):
        self.httpd = ThreadingHTTPServer((host, port), _handler_for(scorer))
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self.httpd.serve_forever()

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
