"""Model adapters behind the sidecar endpoints.

The toy family is fully deterministic and self-contained: fill-mask
candidates come from a real forward pass (hashed context embedding through
L tanh blocks into a vocabulary projection), so inference cost genuinely
scales with parameter count. Real checkpoints (transformers /
sentence-transformers) are loaded instead when their names are configured
and the weights are available.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass

import numpy as np

from .config import ENCODER_DIM, MASK_SENTINEL, REAL_MLM_ALIASES, TOY_MLM_FAMILY, ShimConfig


class ModelLoadError(RuntimeError):
    """A configured model could not be constructed."""


VOCAB = (
    "people time year way day thing man world life hand part child eye woman place work week "
    "case point government company number group problem fact money water month lot right study "
    "book job word business issue side kind head house service friend father power hour game "
    "line end member law car city community name president team minute idea body information "
    "back parent face others level office door health person art war history party result "
    "change morning reason research girl guy moment air teacher force education foot boy age "
    "policy process music market sense nation plan college interest death experience effect "
    "use class control care field development role effort rate heart drug show leader light "
    "voice wife police mind price report decision son view relationship town road arm "
    "difference value building action model season society tax director position player "
    "record paper space ground form event official matter center couple site project activity "
    "star table court american oil situation cost industry figure street image phone data "
    "picture practice piece land product doctor wall patient worker news test movie north "
    "love support technology board"
).split()


def _bucket(token: str, dim: int) -> int:
    return int.from_bytes(hashlib.md5(token.encode()).digest()[:4], "little") % dim


def _sign(token: str) -> float:
    return 1.0 if hashlib.sha1(token.encode()).digest()[0] % 2 == 0 else -1.0


class ToyMaskFillModel:
    """Deterministic fill-mask model with a chosen depth and width."""

    def __init__(self, name: str):
        if name not in TOY_MLM_FAMILY:
            raise ModelLoadError(f"unknown toy MLM {name!r}")
        layers, width = TOY_MLM_FAMILY[name]
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        scale = 1.0 / np.sqrt(width)
        self.name = name
        self.blocks = [
            rng.normal(0, scale, size=(width, width)).astype(np.float32)
            for _ in range(layers)
        ]
        self.output = rng.normal(0, scale, size=(width, len(VOCAB))).astype(np.float32)
        self.width = width
        self.param_count = int(sum(b.size for b in self.blocks) + self.output.size)

    def _context_vector(self, tokens: list[str], mask_index: int) -> np.ndarray:
        ctx = np.zeros(self.width, dtype=np.float32)
        for pos, tok in enumerate(tokens):
            if tok == MASK_SENTINEL:
                continue
            decay = 1.0 / (1.0 + abs(pos - mask_index))
            ctx[_bucket(tok, self.width)] += _sign(tok) * decay
        ctx[mask_index % self.width] += 0.5
        return ctx

    def predict(self, tokens: list[str], mask_index: int, k: int) -> list[dict]:
        h = self._context_vector(tokens, mask_index)
        for block in self.blocks:
            h = np.tanh(h @ block)
        logits = h @ self.output
        k = min(k, len(VOCAB))
        top = np.argpartition(-logits, k - 1)[:k]
        top = top[np.argsort(-logits[top])]
        shifted = logits[top] - logits[top].max()
        scores = np.exp(shifted)
        scores /= scores.sum()
        # softmax floors can underflow to 0 for extreme logits; keep positive
        scores = np.maximum(scores, 1e-12)
        return [
            {"token": VOCAB[i], "score": float(s)}
            for i, s in zip(top, scores)
        ]


class ToyEncoder:
    """Hashed bag-of-words into 384 dims, L2-normalized; lowercases inputs."""

    name = "toy-encoder"
    dim = ENCODER_DIM

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            for tok in text.lower().split():
                out[row, _bucket(tok, self.dim)] += _sign(tok)
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class ToyTranslator:
    """Invertible suffix scheme serving exactly the configured pair."""

    name = "toy-translator"

    def __init__(self, src: str, tgt: str):
        self.pair = {src, tgt}

    def translate(self, text: str, src: str, tgt: str) -> str:
        if {src, tgt} != self.pair or src == tgt:
            raise KeyError(f"unsupported pair {src}->{tgt}")
        marker = "_" + src
        out = []
        for tok in text.split():
            out.append(tok[: -len(marker)] if tok.endswith(marker) else tok + "_" + tgt)
        return " ".join(out)


class RealMaskFillModel:
    """transformers fill-mask checkpoint; emits single-token candidates only."""

    def __init__(self, name: str):
        checkpoint = REAL_MLM_ALIASES.get(name, name)
        try:
            from transformers import pipeline

            self._pipe = pipeline("fill-mask", model=checkpoint)
        except Exception as e:
            raise ModelLoadError(f"cannot load fill-mask model {checkpoint!r}: {e}") from e
        self.name = checkpoint
        self.param_count = int(self._pipe.model.num_parameters())
        self._mask = self._pipe.tokenizer.mask_token

    def predict(self, tokens: list[str], mask_index: int, k: int) -> list[dict]:
        wire = [self._mask if t == MASK_SENTINEL else t for t in tokens]
        text = " ".join(wire)
        raw = self._pipe(text, top_k=max(4 * k, k))
        out = []
        seen = set()
        for cand in raw:
            tok = cand["token_str"].strip()
            if not tok or any(ch.isspace() for ch in tok) or tok.startswith("##"):
                continue  # multi-subword or degenerate candidates are dropped
            if tok in seen:
                continue
            seen.add(tok)
            out.append({"token": tok, "score": float(cand["score"])})
            if len(out) == k:
                break
        return out


class RealEncoder:
    """sentence-transformers checkpoint; must produce 384-dim vectors."""

    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(name)
        except Exception as e:
            raise ModelLoadError(f"cannot load encoder {name!r}: {e}") from e
        self.name = name
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode([t.lower() for t in texts]))


class RealTranslator:
    """Marian translation models for the configured pair, both directions."""

    def __init__(self, src: str, tgt: str):
        try:
            from transformers import MarianMTModel, MarianTokenizer
        except Exception as e:
            raise ModelLoadError(f"transformers unavailable: {e}") from e
        self.name = f"opus-mt-{src}<->{tgt}"
        self._models = {}
        for a, b in ((src, tgt), (tgt, src)):
            checkpoint = f"Helsinki-NLP/opus-mt-{a}-{b}"
            try:
                self._models[(a, b)] = (
                    MarianTokenizer.from_pretrained(checkpoint),
                    MarianMTModel.from_pretrained(checkpoint),
                )
            except Exception as e:
                raise ModelLoadError(f"cannot load {checkpoint!r}: {e}") from e

    def translate(self, text: str, src: str, tgt: str) -> str:
        if (src, tgt) not in self._models:
            raise KeyError(f"unsupported pair {src}->{tgt}")
        tokenizer, model = self._models[(src, tgt)]
        batch = tokenizer(text, return_tensors="pt", padding=True)
        generated = model.generate(**batch)
        return tokenizer.decode(generated[0], skip_special_tokens=True)


@dataclass
class ModelBundle:
    mlm: object
    encoder: object
    translator: object

    @property
    def identity(self) -> dict:
        return {"model": self.mlm.name, "param_count": self.mlm.param_count}


def build_models(config: ShimConfig) -> ModelBundle:
    """Construct the configured models, validating the encoder dimension."""
    if config.mlm_model in TOY_MLM_FAMILY:
        mlm = ToyMaskFillModel(config.mlm_model)
    else:
        mlm = RealMaskFillModel(config.mlm_model)
    encoder = ToyEncoder() if config.encoder_model == "toy" else RealEncoder(config.encoder_model)
    validate_encoder(encoder)
    if config.translator_model == "toy":
        translator = ToyTranslator(config.src_lang, config.tgt_lang)
    else:
        translator = RealTranslator(config.src_lang, config.tgt_lang)
    return ModelBundle(mlm=mlm, encoder=encoder, translator=translator)


def validate_encoder(encoder) -> None:
    dim = getattr(encoder, "dim", None)
    if dim is None:
        dim = np.asarray(encoder.encode(["probe"])).shape[-1]
    if int(dim) != ENCODER_DIM:
        raise ModelLoadError(
            f"encoder {getattr(encoder, 'name', '?')!r} emits {dim}-dim vectors, "
            f"need {ENCODER_DIM}"
        )
