import base64
import json
import socketserver
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from fewpixel.core import BudgetedModel
from fewpixel.models.remote import (ProtocolError, RemoteModel, StubServer, TransportError,
                                    decode_request, encode_request, remote_score)


def test_request_encoding_roundtrip(rng):
    img = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    body = json.loads(encode_request(img))
    assert body["width"] == 7 and body["height"] == 5
    assert base64.b64decode(body["pixels"]) == img.tobytes()
    assert np.array_equal(decode_request(encode_request(img)), img)


def test_uniform_stub():
    with StubServer(lambda img: np.full(4, 0.25)) as srv:
        s = remote_score(RemoteModel(srv.url), np.zeros((2, 2, 3), np.uint8))
    assert s.tolist() == [0.25] * 4


def test_roundtrip_bit_exact(random_model, rng):
    with StubServer(random_model) as srv:
        remote = RemoteModel(srv.url)
        for _ in range(20):
            img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
            assert remote(img).tobytes() == random_model(img).tobytes()


def test_unnormalized_response_is_protocol_error():
    with StubServer(lambda img: np.array([0.4, 0.4])) as srv:
        budgeted = BudgetedModel(RemoteModel(srv.url), budget=5)
        with pytest.raises(ProtocolError):
            budgeted.score(np.zeros((2, 2, 3), np.uint8))
    assert budgeted.calls_used == 0


def test_bad_request_gets_400():
    with StubServer(lambda img: np.ones(1)) as srv:
        req = urllib.request.Request(srv.url + "/v1/scores", data=b'{"width": 2}', method="POST")
        with pytest.raises(urllib.error.HTTPError) as info:
            urllib.request.urlopen(req, timeout=5)
    assert info.value.code == 400


class _BlackHole(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def test_timeout_retries_then_transport_error():
    hits = []

    class Handler(socketserver.BaseRequestHandler):
        def handle(self):
            hits.append(1)
            time.sleep(1.0)

    srv = _BlackHole(("127.0.0.1", 0), Handler)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        remote = RemoteModel(f"http://127.0.0.1:{srv.server_address[1]}", timeout=0.2, retries=2)
        budgeted = BudgetedModel(remote, budget=5)
        with pytest.raises(TransportError):
            budgeted.score(np.zeros((2, 2, 3), np.uint8))
        assert remote.attempts == 3
        assert budgeted.calls_used == 0
    finally:
        srv.shutdown()
        srv.server_close()
    assert len(hits) == 3


def test_connection_refused_is_transport_error():
    with StubServer(lambda img: np.ones(1)) as srv:
        url = srv.url
    with pytest.raises(TransportError):
        RemoteModel(url, timeout=0.5, retries=1)(np.zeros((2, 2, 3), np.uint8))
