"""Benchmark drivers: training-size curves, method comparison tables,
augmentation timing, embedding displacement, and an exact t-SNE.

Every run derives its randomness from the experiment seed, so a frozen
seed reproduces result tables byte for byte. The vanilla model trained in
a run is the one that scores that same run's augmented sentences for
loss-based filtering.
"""

from __future__ import annotations

import logging
import time
import zlib
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .augment import AugmentParams, RngStream, _augment_one, augment_dataset, load_lexicon, load_stopwords
from .backends import Backends
from .classifier import MLPParams, TrainConfig, evaluate, per_example_loss, train
from .corpus import Dataset, Example, sample_subset
from .errors import SubsetTooLargeError
from .filtering import filter_lowest_loss, score_augmented

log = logging.getLogger(__name__)

SPECIAL_ROWS = ("vanilla", "real_sample")


def derive_seed(base: int, *key: int | str) -> int:
    """A stable child seed for a (base, key...) combination."""
    parts = tuple(zlib.crc32(str(k).encode()) for k in key)
    seq = np.random.SeedSequence(base % 2**63, spawn_key=parts)
    return int(seq.generate_state(1, dtype=np.uint64)[0] % 2**63)


@dataclass(frozen=True)
class ExperimentResult:
    """Mean +/- std accuracy of one configuration over repeated runs."""

    dataset: str
    method: str
    train_size: int
    n_aug: int
    keep_fraction: float | None
    accuracies: tuple[float, ...]
    mean: float
    std: float

    def __post_init__(self):
        if len(self.accuracies) < 2:
            raise ValueError("a result needs at least 2 runs")
        arr = np.array(self.accuracies)
        if abs(float(arr.mean()) - self.mean) > 1e-9 or abs(float(arr.std()) - self.std) > 1e-9:
            raise ValueError("mean/std inconsistent with accuracies")

    @property
    def n_runs(self) -> int:
        return len(self.accuracies)

    @classmethod
    def from_accuracies(
        cls,
        dataset: str,
        method: str,
        train_size: int,
        n_aug: int,
        keep_fraction: float | None,
        accuracies: Sequence[float],
    ) -> "ExperimentResult":
        arr = np.array(list(accuracies))
        return cls(
            dataset=dataset,
            method=method,
            train_size=train_size,
            n_aug=n_aug,
            keep_fraction=keep_fraction,
            accuracies=tuple(float(a) for a in arr),
            mean=float(arr.mean()),
            std=float(arr.std()),  # population std; run counts are small and known
        )


@dataclass(frozen=True)
class CellFailure:
    method: str
    n_aug: int
    keep_fraction: float | None
    run: int
    error: str


@dataclass
class CompareReport:
    results: list[ExperimentResult]
    failures: list[CellFailure]


@dataclass(frozen=True)
class TimingResult:
    method: str
    n_sentences: int
    seconds: float
    model: str
    param_count: int | None = None


class _EmbeddingCache:
    """Encode each distinct dataset text once; look rows up by example id."""

    def __init__(self, encoder, d: Dataset):
        self.matrix = encoder.encode([ex.text for ex in d.examples])
        self.row_of = {ex.id: i for i, ex in enumerate(d.examples)}

    def pairs(self, examples: Sequence[Example]) -> list[tuple[np.ndarray, str]]:
        return [(self.matrix[self.row_of[ex.id]], ex.label) for ex in examples]


def size_curve(
    d: Dataset,
    test: Dataset,
    sizes: Sequence[int],
    n_runs: int,
    encoder,
    cfg: TrainConfig,
) -> list[ExperimentResult]:
    """Test accuracy as a function of training-set size.

    The same fixed test set is reused for every point; each (size, run)
    pair draws its own stratified subset.
    """
    for size in sizes:
        if size > len(d):
            raise SubsetTooLargeError(f"size {size} exceeds dataset of {len(d)}")
    if n_runs < 2:
        raise ValueError("size_curve needs n_runs >= 2")
    cache = _EmbeddingCache(encoder, d)
    test_pairs = [(vec, ex.label) for vec, ex in zip(encoder.encode([e.text for e in test]), test)]

    results = []
    for size in sizes:
        accuracies = []
        for run in range(n_runs):
            seed = derive_seed(cfg.seed, "curve", size, run)
            try:
                subset = sample_subset(d, size, seed)
                params = train(cache.pairs(subset.examples), replace(cfg, seed=seed), labels=d.labels)
                accuracies.append(evaluate(params, test_pairs))
            except Exception as e:
                raise type(e)(f"size {size}, run {run}: {e}") from e
        results.append(
            ExperimentResult.from_accuracies(d.name, "vanilla", size, 0, None, accuracies)
        )
    return results


def compare_methods(
    d: Dataset,
    test: Dataset,
    train_size: int,
    methods: Sequence[str],
    n_augs: Sequence[int] = (1, 4),
    keep_fractions: Sequence[float] = (0.25, 0.5, 0.8, 1.0),
    n_runs: int = 10,
    backends: Backends | None = None,
    cfg: TrainConfig | None = None,
    aug_params: AugmentParams | None = None,
    lexicon: Mapping[str, Sequence[str]] | None = None,
    stopwords: frozenset[str] | None = None,
    jobs: int = 1,
) -> CompareReport:
    """The method-comparison protocol.

    Per run: draw a stratified subset and train the vanilla model; the
    vanilla row is that model's accuracy; the real_sample row retrains with
    train_size*n_aug additional real examples disjoint from the subset;
    each augmentation method augments the subset, is scored and filtered by
    the same run's vanilla model, and retrains on subset + kept. Back
    translation is deterministic, so it only runs at n_aug=1.
    """
    if backends is None:
        backends = Backends.mock()
    if cfg is None:
        cfg = TrainConfig()
    if aug_params is None:
        aug_params = AugmentParams()
    if lexicon is None:
        lexicon = load_lexicon()
    if stopwords is None:
        stopwords = load_stopwords()
    if n_runs < 2:
        raise ValueError("compare_methods needs n_runs >= 2")
    unknown = set(methods) - set(SPECIAL_ROWS) - {"imf", "ri", "rs", "rd", "sr", "bt", "br"}
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")

    encoder = backends.encoder
    cache = _EmbeddingCache(encoder, d)
    test_pairs = [
        (vec, ex.label) for vec, ex in zip(encoder.encode([e.text for e in test]), test)
    ]
    aug_methods = [m for m in methods if m not in SPECIAL_ROWS]

    cells: dict[tuple, list[float]] = {}
    failures: list[CellFailure] = []

    def combos_for(method: str) -> list[tuple[int, float | None]]:
        augs = [1] if method == "bt" else list(n_augs)
        return [(a, f) for a in augs for f in keep_fractions]

    for run in range(n_runs):
        run_seed = derive_seed(aug_params.global_seed, "compare", run)
        subset = sample_subset(d, train_size, run_seed)
        subset_pairs = cache.pairs(subset.examples)
        try:
            vanilla = train(subset_pairs, replace(cfg, seed=run_seed), labels=d.labels)
        except Exception as e:
            log.warning("run %d: vanilla training failed: %s", run, e)
            failures.append(CellFailure("vanilla", 0, None, run, str(e)))
            continue

        if "vanilla" in methods:
            cells.setdefault(("vanilla", 0, None), []).append(evaluate(vanilla, test_pairs))

        if "real_sample" in methods:
            subset_ids = {ex.id for ex in subset.examples}
            pool = tuple(ex for ex in d.examples if ex.id not in subset_ids)
            for a in n_augs:
                key = ("real_sample", a, None)
                need = train_size * a
                try:
                    if need > len(pool):
                        raise SubsetTooLargeError(
                            f"need {need} held-out real examples, have {len(pool)}"
                        )
                    pool_ds = Dataset(f"{d.name}[pool]", pool, d.label_set)
                    extras = sample_subset(pool_ds, need, derive_seed(run_seed, "real", a))
                    model = train(
                        subset_pairs + cache.pairs(extras.examples),
                        replace(cfg, seed=derive_seed(run_seed, "real-train", a)),
                        labels=d.labels,
                    )
                    cells.setdefault(key, []).append(evaluate(model, test_pairs))
                except Exception as e:
                    failures.append(CellFailure("real_sample", a, None, run, str(e)))

        for method in aug_methods:
            for a in [1] if method == "bt" else list(n_augs):
                try:
                    augmented = augment_dataset(
                        subset,
                        method,
                        replace(aug_params, n_aug=a, global_seed=derive_seed(run_seed, method, a)),
                        backends,
                        lexicon=lexicon,
                        stopwords=stopwords,
                        jobs=jobs,
                    )
                    scored = score_augmented(vanilla, encoder, augmented)
                    aug_vectors = encoder.encode([item.text for item in scored])
                except Exception as e:
                    for f in keep_fractions:
                        failures.append(CellFailure(method, a, f, run, str(e)))
                    continue
                for f in keep_fractions:
                    key = (method, a, f)
                    try:
                        kept = filter_lowest_loss(scored, f)
                        kept_rows = _match_rows(scored, kept)
                        extra_pairs = [
                            (aug_vectors[row], item.label)
                            for row, item in zip(kept_rows, kept)
                        ]
                        model = train(
                            subset_pairs + extra_pairs,
                            replace(cfg, seed=derive_seed(run_seed, method, a, f)),
                            labels=d.labels,
                        )
                        cells.setdefault(key, []).append(evaluate(model, test_pairs))
                    except Exception as e:
                        failures.append(CellFailure(method, a, f, run, str(e)))

    results = []
    ordering = [("vanilla", 0, None)] if "vanilla" in methods else []
    if "real_sample" in methods:
        ordering += [("real_sample", a, None) for a in n_augs]
    for method in aug_methods:
        ordering += [(method, a, f) for a, f in combos_for(method)]
    for key in ordering:
        accs = cells.get(key, [])
        method, a, f = key
        if len(accs) >= 2:
            results.append(
                ExperimentResult.from_accuracies(d.name, method, train_size, a, f, accs)
            )
        elif not any(
            fl.method == method and fl.n_aug == a and fl.keep_fraction == f
            for fl in failures
        ):
            failures.append(CellFailure(method, a, f, -1, "fewer than 2 successful runs"))
    return CompareReport(results=results, failures=failures)


def _match_rows(scored: Sequence, kept: Sequence) -> list[int]:
    """Row indices of kept items in the scored list (both share order)."""
    rows = []
    p = 0
    for item in kept:
        while scored[p] is not item:
            p += 1
        rows.append(p)
        p += 1
    return rows


def time_augmentation(
    method: str,
    sentences: Sequence[str],
    backends: Backends,
    params: AugmentParams | None = None,
    lexicon: Mapping[str, Sequence[str]] | None = None,
    stopwords: frozenset[str] | None = None,
) -> TimingResult:
    """Wall-clock seconds to augment the given sentences on one stream.

    The canonical protocol times 100 sentences; any non-empty batch is
    accepted so timing can be sanity-checked for additivity.
    """
    if not sentences:
        raise ValueError("nothing to time")
    if params is None:
        params = AugmentParams()
    if lexicon is None:
        lexicon = load_lexicon()
    if stopwords is None:
        stopwords = load_stopwords()

    model, param_count = _model_identity(backends)
    start = time.perf_counter()
    for idx, sent in enumerate(sentences):
        rng = RngStream(params.global_seed, idx, 0, method)
        _augment_one(sent, method, params, backends, lexicon, stopwords, rng)
    elapsed = time.perf_counter() - start
    return TimingResult(
        method=method,
        n_sentences=len(sentences),
        seconds=elapsed,
        model=model,
        param_count=param_count,
    )


def _model_identity(backends: Backends) -> tuple[str, int | None]:
    mlm = backends.mlm
    if mlm is None:
        return "none", None
    health = getattr(mlm, "health", None)
    if callable(health):
        try:
            info = health()
            return str(info.get("model", "unknown")), info.get("param_count")
        except Exception:
            return getattr(mlm, "name", "unknown"), None
    return getattr(mlm, "name", "unknown"), None


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v); zero vectors contribute distance 1 by convention."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if np.array_equal(u, v):
        norm = np.linalg.norm(u)
        return 1.0 if norm == 0 else 0.0
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 1.0
    cos = float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
    return 1.0 - cos


def displacement(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean cosine distance between original and augmented embeddings."""
    if not pairs:
        raise ValueError("displacement needs at least one pair")
    return float(np.mean([cosine_distance(u, v) for u, v in pairs]))


# ---------------------------------------------------------------------------
# Exact t-SNE (O(n^2) pairwise formulation), sized for a few hundred points.
# ---------------------------------------------------------------------------

TSNE_EARLY_EXAGGERATION = 12.0
TSNE_EXAGGERATION_ITERS = 250
TSNE_MOMENTUM_SWITCH = 250
TSNE_ETA = 200.0
TSNE_MIN_GAIN = 0.01


def _entropy_and_probs(dist_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    p = np.exp(-dist_row * beta)
    total = p.sum()
    if total <= 0:
        return 0.0, np.zeros_like(p)
    h = np.log(total) + beta * float(np.dot(dist_row, p)) / total
    return h, p / total


def _calibrated_affinities(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Binary-search each point's bandwidth to hit the target perplexity."""
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(sq_dists[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        h, probs = _entropy_and_probs(row, beta)
        for _ in range(50):
            if abs(h - target) < 1e-5:
                break
            if h > target:
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if np.isinf(beta_min) else (beta + beta_min) / 2.0
            h, probs = _entropy_and_probs(row, beta)
        P[i, np.arange(n) != i] = probs
    return P


def tsne_2d(
    vectors: Sequence[np.ndarray] | np.ndarray,
    perplexity: float | None = None,
    iterations: int = 1000,
    seed: int = 0,
) -> np.ndarray:
    """Map vectors to 2-d with exact t-SNE; deterministic in seed.

    The default perplexity of 30 is capped at (n - 1) / 3. Gradient descent
    uses early exaggeration of 12 for the first 250 iterations and a
    momentum switch from 0.5 to 0.8 at iteration 250.
    """
    X = np.asarray(vectors, dtype=float)
    n = X.shape[0]
    if n < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {n}")
    if perplexity is None:
        perplexity = min(30.0, (n - 1) / 3.0)
    if perplexity >= n:
        raise ValueError(f"perplexity {perplexity} must be < n = {n}")
    if perplexity <= 0:
        raise ValueError(f"perplexity must be positive, got {perplexity}")

    sq_norms = (X * X).sum(axis=1)
    sq_dists = np.maximum(sq_norms[:, None] - 2.0 * X @ X.T + sq_norms[None, :], 0.0)

    P = _calibrated_affinities(sq_dists, perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    P *= TSNE_EARLY_EXAGGERATION

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)

    for it in range(iterations):
        if it == TSNE_EXAGGERATION_ITERS:
            P /= TSNE_EARLY_EXAGGERATION
        y_sq = (Y * Y).sum(axis=1)
        student = 1.0 / (1.0 + np.maximum(y_sq[:, None] - 2.0 * Y @ Y.T + y_sq[None, :], 0.0))
        np.fill_diagonal(student, 0.0)
        Q = np.maximum(student / student.sum(), 1e-12)

        PQ = (P - Q) * student
        grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)

        momentum = 0.5 if it < TSNE_MOMENTUM_SWITCH else 0.8
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, TSNE_MIN_GAIN)
        velocity = momentum * velocity - TSNE_ETA * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    if not np.all(np.isfinite(Y)):
        raise ArithmeticError("t-SNE produced non-finite coordinates")
    return Y
