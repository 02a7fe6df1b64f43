"""Pluggable model backends: mask filling, sentence encoding, translation.

Deterministic mock implementations keep the whole pipeline hermetic for
tests and offline runs; HTTP clients speak the sidecar protocol:

    POST /fill_mask  {"tokens": [...], "mask_index": 3, "k": 5}
                     -> {"predictions": [{"token": "fast", "score": 0.61}, ...]}
    POST /encode     {"texts": ["...", ...]} -> {"vectors": [[384 floats], ...]}
    POST /translate  {"text": "...", "src": "en", "tgt": "tr"} -> {"text": "..."}
    GET  /health     -> {"status": "ok", "model": "<name>"}

``fill_mask`` receives the token sequence with the current token still in
place at ``mask_index``; the HTTP client substitutes the mask sentinel on
the wire, and mocks may use the in-place token for echo/table lookup. The
env var AUGTEXT_SHIM_URL overrides any configured endpoint.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import requests

from .errors import BackendUnavailable, MalformedResponse, UnsupportedLanguagePair

EMBED_DIM = 384

# Reserved sentinel the sidecar maps to the model's native mask token.
MASK_TOKEN = "<mask>"

SHIM_URL_ENV = "AUGTEXT_SHIM_URL"


@dataclass(frozen=True)
class MaskPrediction:
    """A candidate replacement token with a positive confidence score."""

    token: str
    score: float

    def __post_init__(self):
        if not self.token:
            raise ValueError("prediction token must be non-empty")
        if not (self.score > 0):
            raise ValueError(f"prediction score must be > 0, got {self.score}")


@dataclass(frozen=True)
class BackendConfig:
    """How to reach a backend. kind == "http" requires an endpoint."""

    kind: str = "mock"
    endpoint: str | None = None
    model_name: str | None = None
    timeout: float = 30.0
    retries: int = 2
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.resolve_endpoint():
            raise ValueError("http backend needs an endpoint (or AUGTEXT_SHIM_URL)")

    def resolve_endpoint(self) -> str | None:
        return os.environ.get(SHIM_URL_ENV) or self.endpoint


def _finalize_predictions(
    raw: Sequence[tuple[str, float]], fallback_token: str, k: int
) -> list[MaskPrediction]:
    """Sort descending, truncate to k, and echo the fallback on empty."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    preds = [MaskPrediction(tok, float(score)) for tok, score in raw]
    preds.sort(key=lambda p: -p.score)
    preds = preds[:k]
    if not preds:
        return [MaskPrediction(fallback_token, 1.0)]
    return preds


def _check_mask_args(tokens: Sequence[str], mask_index: int) -> None:
    if not 0 <= mask_index < len(tokens):
        raise ValueError(f"mask_index {mask_index} out of range for {len(tokens)} tokens")


class EchoMaskFill:
    """Identity backend: always predicts the token already at the position."""

    name = "echo-mock"

    def fill_mask(self, tokens: Sequence[str], mask_index: int, k: int) -> list[MaskPrediction]:
        _check_mask_args(tokens, mask_index)
        return _finalize_predictions([], tokens[mask_index], k)


class TableMaskFill:
    """Predicts from a fixed token -> candidates table.

    Tokens absent from the table fall back to echoing the original.
    """

    name = "table-mock"

    def __init__(self, table: Mapping[str, Sequence[tuple[str, float]]]):
        self.table = dict(table)

    def fill_mask(self, tokens: Sequence[str], mask_index: int, k: int) -> list[MaskPrediction]:
        _check_mask_args(tokens, mask_index)
        original = tokens[mask_index]
        return _finalize_predictions(self.table.get(original, []), original, k)


class FunctionMaskFill:
    """Candidates computed by an arbitrary function of the full context.

    The callable sees (tokens, mask_index) and returns (token, score) pairs;
    useful for context-sensitive and recording mocks in tests.
    """

    name = "function-mock"

    def __init__(self, fn: Callable[[Sequence[str], int], Sequence[tuple[str, float]]]):
        self.fn = fn

    def fill_mask(self, tokens: Sequence[str], mask_index: int, k: int) -> list[MaskPrediction]:
        _check_mask_args(tokens, mask_index)
        return _finalize_predictions(self.fn(tokens, mask_index), tokens[mask_index], k)


def _bow_bucket(token: str) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % EMBED_DIM


def _bow_sign(token: str) -> int:
    digest = hashlib.sha1(token.encode("utf-8")).digest()
    return 1 if digest[0] % 2 == 0 else -1


class HashedBowEncoder:
    """Deterministic bag-of-words encoder.

    Each lowercased whitespace token lands in one of 384 buckets (md5) with
    a +/-1 sign (sha1); the accumulated vector is L2-normalized. Zero
    vectors stay zero. Being order-invariant on purpose, it gives token
    swaps exactly zero embedding displacement.
    """

    name = "hashed-bow-mock"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise ValueError("encode() needs at least one text")
        out = np.zeros((len(texts), EMBED_DIM))
        for row, text in enumerate(texts):
            for token in text.lower().split():
                out[row, _bow_bucket(token)] += _bow_sign(token)
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class SuffixTranslator:
    """Invertible word-level mock: token -> token_<tgt>, inverse strips it."""

    name = "suffix-mock"

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            raise ValueError(f"source and target language are both {src!r}")
        marker = "_" + src
        out = []
        for token in text.split():
            if token.endswith(marker):
                out.append(token[: -len(marker)])
            else:
                out.append(token + "_" + tgt)
        return " ".join(out)


class MappingTranslator:
    """Table-driven mock translator for lossy round-trip tests.

    Keys are (text, src, tgt); unknown texts pass through unchanged.
    """

    name = "mapping-mock"

    def __init__(self, mapping: Mapping[tuple[str, str, str], str]):
        self.mapping = dict(mapping)

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            raise ValueError(f"source and target language are both {src!r}")
        return self.mapping.get((text, src, tgt), text)


class _HttpBase:
    """Shared plumbing: retries, bounded in-flight requests, JSON parsing."""

    def __init__(self, config: BackendConfig):
        if config.kind != "http":
            raise ValueError("HTTP backend requires kind='http'")
        self.config = config
        self.base_url = (config.resolve_endpoint() or "").rstrip("/")
        self._session = requests.Session()
        self._gate = threading.Semaphore(max(1, config.max_inflight))

    def _post(self, path: str, payload: dict) -> dict:
        url = self.base_url + path
        last_error: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                with self._gate:
                    resp = self._session.post(url, json=payload, timeout=self.config.timeout)
            except requests.RequestException as e:
                last_error = e
                continue
            if resp.status_code >= 500:
                last_error = BackendUnavailable(f"{url} returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise MalformedResponse(
                    f"{url} rejected the request ({resp.status_code}): {resp.text[:200]}"
                )
            try:
                body = resp.json()
            except ValueError as e:
                raise MalformedResponse(f"{url}: response is not JSON") from e
            if not isinstance(body, dict):
                raise MalformedResponse(f"{url}: expected a JSON object")
            return body
        raise BackendUnavailable(f"{url}: {last_error}") from last_error

    def health(self) -> dict:
        url = self.base_url + "/health"
        try:
            resp = self._session.get(url, timeout=self.config.timeout)
            resp.raise_for_status()
            return resp.json()
        except (requests.RequestException, ValueError) as e:
            raise BackendUnavailable(f"{url}: {e}") from e


class HttpMaskFill(_HttpBase):
    """Mask-fill client. Substitutes the mask sentinel on the wire."""

    @property
    def name(self) -> str:
        return self.config.model_name or self.base_url

    def fill_mask(self, tokens: Sequence[str], mask_index: int, k: int) -> list[MaskPrediction]:
        _check_mask_args(tokens, mask_index)
        wire = list(tokens)
        original = wire[mask_index]
        wire[mask_index] = MASK_TOKEN
        body = self._post("/fill_mask", {"tokens": wire, "mask_index": mask_index, "k": k})
        preds = body.get("predictions")
        if not isinstance(preds, list):
            raise MalformedResponse('fill_mask response lacks a "predictions" list')
        try:
            raw = [(p["token"], float(p["score"])) for p in preds]
        except (TypeError, KeyError, ValueError) as e:
            raise MalformedResponse(f"bad prediction entry: {e}") from e
        if any(score <= 0 for _, score in raw):
            raise MalformedResponse("prediction scores must be positive")
        return _finalize_predictions(raw, original, k)


class HttpEncoder(_HttpBase):
    """Sentence-encoder client; lowercases texts before sending."""

    @property
    def name(self) -> str:
        return self.config.model_name or self.base_url

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise ValueError("encode() needs at least one text")
        body = self._post("/encode", {"texts": [t.lower() for t in texts]})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise MalformedResponse("encode response must return one vector per text")
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != EMBED_DIM:
            raise MalformedResponse(
                f"encoder must return {EMBED_DIM}-dim vectors, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise MalformedResponse("encoder returned non-finite values")
        return arr


class HttpTranslator(_HttpBase):
    """Translator client for the /translate endpoint."""

    @property
    def name(self) -> str:
        return self.config.model_name or self.base_url

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            raise ValueError(f"source and target language are both {src!r}")
        try:
            body = self._post("/translate", {"text": text, "src": src, "tgt": tgt})
        except MalformedResponse as e:
            if "unsupported" in str(e).lower():
                raise UnsupportedLanguagePair(f"{src}->{tgt}: {e}") from e
            raise
        out = body.get("text")
        if not isinstance(out, str):
            raise MalformedResponse('translate response lacks a string "text" field')
        return out


@dataclass
class Backends:
    """The backend bundle a pipeline run operates with."""

    mlm: object | None = None
    encoder: object | None = None
    translator: object | None = None
    config: BackendConfig = field(default_factory=BackendConfig)

    @classmethod
    def mock(cls, mlm=None, encoder=None, translator=None) -> "Backends":
        """Hermetic defaults: echo MLM, hashed-BoW encoder, suffix translator."""
        return cls(
            mlm=mlm if mlm is not None else EchoMaskFill(),
            encoder=encoder if encoder is not None else HashedBowEncoder(),
            translator=translator if translator is not None else SuffixTranslator(),
            config=BackendConfig(kind="mock"),
        )

    @classmethod
    def http(cls, config: BackendConfig) -> "Backends":
        return cls(
            mlm=HttpMaskFill(config),
            encoder=HttpEncoder(config),
            translator=HttpTranslator(config),
            config=config,
        )

    def identity(self) -> dict:
        """Backend names for run manifests."""
        def describe(backend):
            return getattr(backend, "name", None) if backend is not None else None

        return {
            "kind": self.config.kind,
            "endpoint": self.config.resolve_endpoint(),
            "mlm": describe(self.mlm),
            "encoder": describe(self.encoder),
            "translator": describe(self.translator),
        }
