"""The seven augmentation methods.

Iterative mask filling masks every token left to right, samples a
replacement from the normalized top-k mask-fill scores, and writes it back
before the next position is masked, so later positions are predicted
against already-replaced context. The non-iterative variant (``br``)
queries every masked position against the original token sequence instead.
The remaining baselines are the usual random insertion/swap/deletion and
synonym replacement, plus back translation through a pivot language.

Randomness is always drawn from per-(example, replica, method) streams
derived from the global seed, never from shared state, so results are
reproducible regardless of execution order or parallelism.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backends import Backends, MaskPrediction
from .corpus import AugmentedExample, Dataset
from .errors import AugmentationFailed, BackendError
from .tokenizer import join, word_tokenize

log = logging.getLogger(__name__)

AUG_METHODS = ("imf", "ri", "rs", "rd", "sr", "bt", "br")

# Ten draws to find an insertable word before giving up on one insertion.
INSERTION_ATTEMPTS = 10

# At most this fraction of (example, replica) tasks may fail before the
# whole augmentation run is aborted.
FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class AugmentParams:
    """Shared augmentation knobs.

    k is the mask-fill candidate count, alpha the fraction of words a
    baseline modifies, n_aug the number of augmentations per example.
    """

    k: int = 5
    alpha: float = 0.1
    n_aug: int = 1
    pivot_lang: str = "tr"
    src_lang: str = "en"
    global_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.n_aug < 1:
            raise ValueError(f"n_aug must be >= 1, got {self.n_aug}")


@dataclass(frozen=True)
class RngStream:
    """Derivation key for a private random stream.

    Identical keys always yield identical sequences; distinct example ids,
    replica indices, or method tags yield independent streams.
    """

    global_seed: int
    example_id: int = 0
    replica: int = 0
    method: str = ""

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.global_seed % 2**63,
            spawn_key=(self.example_id, self.replica, zlib.crc32(self.method.encode())),
        )
        return np.random.default_rng(seq)


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword list, one word per line; defaults to the embedded list."""
    if path is None:
        text = resources.files("augtext.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def load_lexicon(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    """Synonym lexicon in "word<TAB>syn1,syn2" format; keys lowercased."""
    if path is None:
        text = resources.files("augtext.data").joinpath("synonyms.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    lexicon: dict[str, tuple[str, ...]] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        word, _, syns = line.partition("\t")
        synonyms = tuple(s.strip() for s in syns.split(",") if s.strip())
        if synonyms:
            lexicon[word.strip().lower()] = synonyms
    return lexicon


def _n_changes(alpha: float, length: int) -> int:
    """max(1, round(alpha * length)) with half-up rounding; 0 when alpha is 0."""
    if alpha == 0:
        return 0
    return max(1, int(np.floor(alpha * length + 0.5)))


def select_word(preds: Sequence[MaskPrediction], rng: RngStream | np.random.Generator) -> str:
    """Sample one candidate token with probability proportional to its score."""
    if not preds:
        raise ValueError("select_word needs at least one prediction")
    gen = _as_generator(rng)
    scores = np.array([p.score for p in preds], dtype=float)
    cumulative = np.cumsum(scores / scores.sum())
    j = int(np.searchsorted(cumulative, gen.random(), side="right"))
    return preds[min(j, len(preds) - 1)].token


def imf_augment(
    sent: str,
    mlm,
    params: AugmentParams,
    rng: RngStream | np.random.Generator,
) -> str:
    """Iteratively mask and refill every token position, left to right.

    Each position is predicted against the current token sequence, so
    replacements made at earlier positions form the context for later ones.
    Token count is preserved exactly.
    """
    if not sent.strip():
        raise ValueError("cannot augment an empty sentence")
    gen = _as_generator(rng)
    tokens = word_tokenize(sent)
    for i in range(len(tokens)):
        try:
            preds = mlm.fill_mask(tokens, i, params.k)
        except BackendError as e:
            raise type(e)(f"position {i} of {len(tokens)}: {e}") from e
        tokens[i] = select_word(preds, gen)
    return join(tokens)


def random_insertion(
    toks: Sequence[str],
    alpha: float,
    lexicon: Mapping[str, Sequence[str]],
    rng: RngStream | np.random.Generator,
    stopwords: frozenset[str] | None = None,
) -> list[str]:
    """Insert synonyms of randomly chosen non-stopwords at random positions."""
    if not toks:
        raise ValueError("cannot augment an empty token list")
    if stopwords is None:
        stopwords = load_stopwords()
    gen = _as_generator(rng)
    out = list(toks)
    n = _n_changes(alpha, len(toks))
    skipped = 0
    for _ in range(n):
        synonyms = None
        for _ in range(INSERTION_ATTEMPTS):
            word = out[int(gen.integers(len(out)))].lower()
            if word in stopwords:
                continue
            candidates = lexicon.get(word)
            if candidates:
                synonyms = candidates
                break
        if synonyms is None:
            skipped += 1
            continue
        synonym = synonyms[int(gen.integers(len(synonyms)))]
        position = int(gen.integers(len(out) + 1))
        out.insert(position, synonym)
    if skipped:
        log.warning("random_insertion skipped %d of %d insertions (no synonym found)", skipped, n)
    return out


def random_swap(
    toks: Sequence[str], alpha: float, rng: RngStream | np.random.Generator
) -> list[str]:
    """Swap pairs of distinct random positions; token multiset is preserved."""
    if not toks:
        raise ValueError("cannot augment an empty token list")
    out = list(toks)
    if len(out) < 2:
        return out
    gen = _as_generator(rng)
    for _ in range(_n_changes(alpha, len(toks))):
        i, j = gen.choice(len(out), size=2, replace=False)
        out[i], out[j] = out[j], out[i]
    return out


def random_deletion(
    toks: Sequence[str], alpha: float, rng: RngStream | np.random.Generator
) -> list[str]:
    """Delete each token independently with probability alpha; never empty."""
    if not toks:
        raise ValueError("cannot augment an empty token list")
    gen = _as_generator(rng)
    draws = gen.random(len(toks))
    out = [tok for tok, draw in zip(toks, draws) if draw >= alpha]
    if not out:
        out = [toks[int(gen.integers(len(toks)))]]
    return out


def synonym_replacement(
    toks: Sequence[str],
    alpha: float,
    lexicon: Mapping[str, Sequence[str]],
    stopwords: frozenset[str],
    rng: RngStream | np.random.Generator,
) -> list[str]:
    """Replace random eligible words (non-stopword, in lexicon) with synonyms."""
    if not toks:
        raise ValueError("cannot augment an empty token list")
    gen = _as_generator(rng)
    out = list(toks)
    n = _n_changes(alpha, len(toks))
    if n == 0:
        return out
    eligible = [
        i for i, tok in enumerate(out)
        if tok.lower() not in stopwords and lexicon.get(tok.lower())
    ]
    if not eligible:
        log.warning("synonym_replacement: no eligible position in %d tokens", len(toks))
        return out
    chosen = gen.choice(len(eligible), size=min(n, len(eligible)), replace=False)
    for idx in sorted(eligible[i] for i in chosen):
        synonyms = lexicon[out[idx].lower()]
        out[idx] = synonyms[int(gen.integers(len(synonyms)))]
    return out


def bert_replacement(
    toks: Sequence[str],
    alpha: float,
    mlm,
    k: int,
    rng: RngStream | np.random.Generator,
) -> list[str]:
    """Replace random positions with mask-fill predictions, non-iteratively.

    Every masked position is queried against the original token sequence;
    replacements never become context for one another.
    """
    if not toks:
        raise ValueError("cannot augment an empty token list")
    gen = _as_generator(rng)
    original = list(toks)
    out = list(toks)
    n = _n_changes(alpha, len(toks))
    if n == 0:
        return out
    positions = sorted(gen.choice(len(toks), size=min(n, len(toks)), replace=False))
    for pos in positions:
        try:
            preds = mlm.fill_mask(original, int(pos), k)
        except BackendError as e:
            raise type(e)(f"position {pos} of {len(toks)}: {e}") from e
        out[int(pos)] = select_word(preds, gen)
    return out


def back_translate(text: str, translator, pivot: str = "tr", src: str = "en") -> str:
    """Translate to the pivot language and back."""
    if not text.strip():
        raise ValueError("cannot back-translate an empty text")
    there = translator.translate(text, src, pivot)
    return translator.translate(there, pivot, src)


def _augment_one(
    text: str,
    method: str,
    params: AugmentParams,
    backends: Backends,
    lexicon: Mapping[str, Sequence[str]],
    stopwords: frozenset[str],
    rng: RngStream,
) -> str:
    if method == "imf":
        return imf_augment(text, backends.mlm, params, rng)
    if method == "bt":
        return back_translate(text, backends.translator, params.pivot_lang, params.src_lang)
    toks = word_tokenize(text)
    if method == "ri":
        out = random_insertion(toks, params.alpha, lexicon, rng, stopwords)
    elif method == "rs":
        out = random_swap(toks, params.alpha, rng)
    elif method == "rd":
        out = random_deletion(toks, params.alpha, rng)
    elif method == "sr":
        out = synonym_replacement(toks, params.alpha, lexicon, stopwords, rng)
    elif method == "br":
        out = bert_replacement(toks, params.alpha, backends.mlm, params.k, rng)
    else:
        raise ValueError(f"unknown augmentation method {method!r}")
    return join(out)


def augment_dataset(
    d: Dataset,
    method: str,
    params: AugmentParams,
    backends: Backends,
    lexicon: Mapping[str, Sequence[str]] | None = None,
    stopwords: frozenset[str] | None = None,
    jobs: int = 1,
) -> list[AugmentedExample]:
    """Produce n_aug augmented examples per source example.

    Deterministic in params.global_seed; examples may be processed in
    parallel because every (example, replica) pair owns its own stream.
    Individual backend failures are tolerated up to 1% of the workload,
    after which the whole run fails.
    """
    if method not in AUG_METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {AUG_METHODS}")
    if method in ("imf", "br") and backends.mlm is None:
        raise ValueError(f"method {method!r} needs a mask-fill backend")
    if method == "bt" and backends.translator is None:
        raise ValueError("method 'bt' needs a translator backend")
    if method == "bt" and params.n_aug > 1:
        log.warning(
            "back translation is deterministic: %d replicas per example will be identical",
            params.n_aug,
        )
    if lexicon is None:
        lexicon = load_lexicon()
    if stopwords is None:
        stopwords = load_stopwords()

    tasks = [(ex, replica) for ex in d.examples for replica in range(params.n_aug)]

    def run(task: tuple) -> AugmentedExample:
        ex, replica = task
        rng = RngStream(params.global_seed, ex.id, replica, method)
        text = _augment_one(ex.text, method, params, backends, lexicon, stopwords, rng)
        return AugmentedExample(orig_id=ex.id, method=method, text=text, label=ex.label)

    results: list[AugmentedExample | None] = [None] * len(tasks)
    failures: list[tuple[int, Exception]] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for idx, outcome in enumerate(pool.map(_trap(run), tasks)):
                if isinstance(outcome, Exception):
                    failures.append((idx, outcome))
                else:
                    results[idx] = outcome
    else:
        for idx, task in enumerate(tasks):
            try:
                results[idx] = run(task)
            except (BackendError, ValueError) as e:
                failures.append((idx, e))

    if failures:
        if len(failures) > FAILURE_BUDGET * len(tasks):
            first_idx, first_err = failures[0]
            raise AugmentationFailed(
                f"{len(failures)}/{len(tasks)} augmentations failed; "
                f"first failure (task {first_idx}): {first_err}"
            ) from first_err
        log.warning("%d/%d augmentations failed and were dropped", len(failures), len(tasks))
    return [r for r in results if r is not None]


def _trap(fn):
    def wrapped(task):
        try:
            return fn(task)
        except (BackendError, ValueError) as e:
            return e

    return wrapped
