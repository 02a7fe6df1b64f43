"""Mock backend contracts and the HTTP client protocol."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from augtext.backends import (
    EMBED_DIM,
    MASK_TOKEN,
    BackendConfig,
    Backends,
    EchoMaskFill,
    FunctionMaskFill,
    HashedBowEncoder,
    HttpEncoder,
    HttpMaskFill,
    HttpTranslator,
    MappingTranslator,
    MaskPrediction,
    SuffixTranslator,
    TableMaskFill,
)
from augtext.errors import BackendUnavailable, MalformedResponse


class TestMaskPrediction:
    def test_positive_score_required(self):
        with pytest.raises(ValueError):
            MaskPrediction("tok", 0.0)

    def test_empty_token_rejected(self):
        with pytest.raises(ValueError):
            MaskPrediction("", 1.0)


class TestMockMaskFill:
    def test_echo_returns_original(self):
        preds = EchoMaskFill().fill_mask(["the", "quick", "fox"], 1, 5)
        assert preds == [MaskPrediction("quick", 1.0)]

    def test_table_lookup_sorted(self):
        mock = TableMaskFill({"quick": [("quick", 0.4), ("fast", 0.6)]})
        preds = mock.fill_mask(["the", "quick", "fox"], 1, 5)
        assert [(p.token, p.score) for p in preds] == [("fast", 0.6), ("quick", 0.4)]

    def test_k_truncates_to_top_scored(self):
        mock = TableMaskFill({"a": [("x", 0.5), ("y", 0.3), ("z", 0.2)]})
        preds = mock.fill_mask(["a"], 0, 1)
        assert [p.token for p in preds] == ["x"]

    def test_table_miss_falls_back_to_echo(self):
        mock = TableMaskFill({"quick": [("fast", 0.6)]})
        preds = mock.fill_mask(["slow"], 0, 5)
        assert preds == [MaskPrediction("slow", 1.0)]

    def test_scores_non_increasing_and_bounded(self):
        mock = TableMaskFill({"a": [("w", 0.1), ("x", 0.5), ("y", 0.3), ("z", 0.2)]})
        for k in (1, 2, 3, 4, 9):
            preds = mock.fill_mask(["a"], 0, k)
            assert 1 <= len(preds) <= k
            scores = [p.score for p in preds]
            assert all(a >= b for a, b in zip(scores, scores[1:]))
            assert all(s > 0 for s in scores)

    def test_mask_index_out_of_range(self):
        with pytest.raises(ValueError):
            EchoMaskFill().fill_mask(["a"], 1, 5)

    def test_function_mock_sees_context(self):
        mock = FunctionMaskFill(lambda toks, i: [("|".join(toks), 1.0)])
        preds = mock.fill_mask(["a", "b"], 0, 5)
        assert preds[0].token == "a|b"


class TestHashedBowEncoder:
    def test_order_invariance(self):
        enc = HashedBowEncoder()
        a, b = enc.encode(["a b", "b a"])
        assert np.array_equal(a, b)

    def test_lowercase_pre_step(self):
        enc = HashedBowEncoder()
        a, b = enc.encode(["The", "the"])
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        (v,) = HashedBowEncoder().encode(["hello"])
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert v.shape == (EMBED_DIM,)

    def test_zero_vector_stays_zero(self):
        # A sign collision cancels only if the same bucket gets +1 and -1;
        # the empty-ish path is exercised with no tokens at all.
        (v,) = HashedBowEncoder().encode(["   "])
        assert np.all(v == 0)

    def test_deterministic_across_calls(self):
        enc = HashedBowEncoder()
        a = enc.encode(["some words here"])
        b = enc.encode(["some words here"])
        assert np.array_equal(a, b)


class TestMockTranslators:
    def test_suffix_construction(self):
        t = SuffixTranslator()
        assert t.translate("a", "en", "tr") == "a_tr"

    def test_round_trip_identity(self):
        t = SuffixTranslator()
        there = t.translate("a b", "en", "tr")
        assert t.translate(there, "tr", "en") == "a b"

    def test_same_language_rejected(self):
        with pytest.raises(ValueError):
            SuffixTranslator().translate("a", "en", "en")

    def test_mapping_translator_lossy_route(self):
        t = MappingTranslator({("hi", "en", "tr"): "selam", ("selam", "tr", "en"): "hello"})
        assert t.translate(t.translate("hi", "en", "tr"), "tr", "en") == "hello"


class _StubHandler(BaseHTTPRequestHandler):
    """Scripted responses keyed by path; records request bodies."""

    script = {}
    requests = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests.append((self.path, body))
        status, payload = self.script.get(self.path, (404, {}))
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(json.dumps(payload).encode())

    def do_GET(self):
        status, payload = self.script.get(self.path, (404, {}))
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _StubHandler.script = {}
    _StubHandler.requests = []
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def http_config(url):
    return BackendConfig(kind="http", endpoint=url, timeout=2.0, retries=1)


class TestHttpClients:
    def test_fill_mask_sends_sentinel_and_parses(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/fill_mask"] = (
            200, {"predictions": [{"token": "fast", "score": 0.6},
                                  {"token": "quick", "score": 0.4}]})
        client = HttpMaskFill(http_config(url))
        preds = client.fill_mask(["the", "quick", "fox"], 1, 5)
        assert [p.token for p in preds] == ["fast", "quick"]
        path, body = _StubHandler.requests[0]
        assert body["tokens"] == ["the", MASK_TOKEN, "fox"]
        assert body["mask_index"] == 1

    def test_fill_mask_empty_candidates_echo(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/fill_mask"] = (200, {"predictions": []})
        client = HttpMaskFill(http_config(url))
        preds = client.fill_mask(["the", "quick", "fox"], 1, 5)
        assert preds == [MaskPrediction("quick", 1.0)]

    def test_malformed_response(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/fill_mask"] = (200, {"nope": 1})
        client = HttpMaskFill(http_config(url))
        with pytest.raises(MalformedResponse):
            client.fill_mask(["a"], 0, 5)

    def test_server_error_becomes_unavailable_after_retries(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/fill_mask"] = (500, {})
        client = HttpMaskFill(http_config(url))
        with pytest.raises(BackendUnavailable):
            client.fill_mask(["a"], 0, 5)
        # initial try plus one retry
        assert len(_StubHandler.requests) == 2

    def test_connection_refused(self):
        client = HttpMaskFill(http_config("http://127.0.0.1:9"))
        with pytest.raises(BackendUnavailable):
            client.fill_mask(["a"], 0, 5)

    def test_encoder_validates_dimension(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/encode"] = (200, {"vectors": [[0.0] * 10]})
        client = HttpEncoder(http_config(url))
        with pytest.raises(MalformedResponse):
            client.encode(["text"])

    def test_encoder_lowercases_on_the_wire(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/encode"] = (200, {"vectors": [[0.0] * EMBED_DIM]})
        HttpEncoder(http_config(url)).encode(["MiXeD CaSe"])
        _, body = _StubHandler.requests[0]
        assert body["texts"] == ["mixed case"]

    def test_translator_round(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/translate"] = (200, {"text": "selam"})
        out = HttpTranslator(http_config(url)).translate("hi", "en", "tr")
        assert out == "selam"

    def test_health(self, stub_server):
        server, url = stub_server
        _StubHandler.script["/health"] = (200, {"status": "ok", "model": "m"})
        assert HttpMaskFill(http_config(url)).health()["model"] == "m"


class TestBackendConfig:
    def test_http_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("AUGTEXT_SHIM_URL", raising=False)
        with pytest.raises(ValueError):
            BackendConfig(kind="http")

    def test_env_var_overrides(self, monkeypatch):
        monkeypatch.setenv("AUGTEXT_SHIM_URL", "http://example:9999")
        cfg = BackendConfig(kind="http", endpoint="http://configured:1111")
        assert cfg.resolve_endpoint() == "http://example:9999"

    def test_mock_bundle_identity(self):
        info = Backends.mock().identity()
        assert info["kind"] == "mock"
        assert info["mlm"] == "echo-mock"
