"""The fixed evaluation classifier: 384 -> 64 -> 16 -> 4 -> C.

Hidden layers use tanh, the output layer softmax; training is mini-batch
Adam on mean cross-entropy. Everything is plain numpy with hand-written
backprop so gradients can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import TrainingDiverged

INPUT_DIM = 384
HIDDEN_DIMS = (64, 16, 4)

# Softmax outputs are clamped here before the log in cross-entropy.
PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAMS_FORMAT_VERSION = 1


@dataclass
class MLPParams:
    """Layer weights/biases plus the label ordering they were trained with."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        dims = (INPUT_DIM, *HIDDEN_DIMS, self.num_classes)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (dims[i], dims[i + 1])
            if w.shape != expect:
                raise ValueError(f"layer {i}: weight shape {w.shape}, expected {expect}")
            if b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i}: bias shape {b.shape}, expected ({dims[i+1]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
        if self.labels is not None and len(self.labels) != self.num_classes:
            raise ValueError(
                f"{len(self.labels)} labels for {self.num_classes} output units"
            )

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def label_index(self, label: str) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def copy(self) -> "MLPParams":
        return MLPParams(
            weights=tuple(w.copy() for w in self.weights),
            biases=tuple(b.copy() for b in self.biases),
            labels=self.labels,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError(f"all training settings must be positive: {self}")


def init_params(num_classes: int, seed: int, labels: Sequence[str] | None = None) -> MLPParams:
    """Xavier-uniform weights, zero biases, deterministic in seed."""
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    rng = np.random.default_rng(seed)
    dims = (INPUT_DIM, *HIDDEN_DIMS, num_classes)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(
        weights=tuple(weights),
        biases=tuple(biases),
        labels=tuple(labels) if labels is not None else None,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def forward(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a single vector or a batch."""
    single = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=float))
    if h.shape[1] != INPUT_DIM:
        raise ValueError(f"input dim {h.shape[1]}, expected {INPUT_DIM}")
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.tanh(h @ w + b)
    probs = _softmax(h @ params.weights[-1] + params.biases[-1])
    return probs[0] if single else probs


def _forward_cached(params: MLPParams, x: np.ndarray):
    """Forward pass keeping layer activations for backprop."""
    activations = [x]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.tanh(h @ w + b)
        activations.append(h)
    probs = _softmax(h @ params.weights[-1] + params.biases[-1])
    return probs, activations


def batch_loss(params: MLPParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of a batch (y holds class indices)."""
    probs = forward(params, x)
    probs = np.atleast_2d(probs)
    picked = np.maximum(probs[np.arange(len(y)), y], PROB_FLOOR)
    return float(-np.log(picked).mean())


def loss_gradients(params: MLPParams, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    n = len(y)
    probs, activations = _forward_cached(params, x)
    picked = np.maximum(probs[np.arange(n), y], PROB_FLOOR)
    loss = float(-np.log(picked).mean())

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [np.empty(0)] * len(params.weights)
    grad_b = [np.empty(0)] * len(params.biases)
    for layer in reversed(range(len(params.weights))):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (1.0 - activations[layer] ** 2)
    return loss, grad_w, grad_b


def _prepare(data: Sequence[tuple[np.ndarray, str]], labels: Sequence[str] | None):
    xs = np.stack([np.asarray(vec, dtype=float) for vec, _ in data])
    raw_labels = [label for _, label in data]
    if labels is None:
        labels = sorted(set(raw_labels))
    else:
        labels = list(labels)
        missing = sorted(set(labels) - set(raw_labels))
        if missing:
            raise ValueError(f"classes with no training example: {missing}")
    index = {label: i for i, label in enumerate(labels)}
    ys = np.array([index[label] for label in raw_labels])
    return xs, ys, tuple(labels)


def train(
    data: Sequence[tuple[np.ndarray, str]],
    cfg: TrainConfig,
    labels: Sequence[str] | None = None,
) -> MLPParams:
    """Mini-batch Adam training; deterministic in (data, cfg)."""
    if not data:
        raise ValueError("training set is empty")
    xs, ys, label_order = _prepare(data, labels)
    if len(label_order) < 2:
        raise ValueError("training data must contain at least 2 classes")
    params = init_params(len(label_order), cfg.seed, labels=label_order)
    shuffler = np.random.default_rng(np.random.SeedSequence(cfg.seed % 2**63, spawn_key=(1,)))

    m_w = [np.zeros_like(w) for w in params.weights]
    v_w = [np.zeros_like(w) for w in params.weights]
    m_b = [np.zeros_like(b) for b in params.biases]
    v_b = [np.zeros_like(b) for b in params.biases]
    step = 0

    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    for epoch in range(cfg.epochs):
        order = shuffler.permutation(len(xs))
        for start in range(0, len(xs), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            snapshot = MLPParams(tuple(weights), tuple(biases), label_order)
            loss, grad_w, grad_b = loss_gradients(snapshot, xs[batch], ys[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            step += 1
            scale = cfg.learning_rate * np.sqrt(1 - ADAM_BETA2**step) / (1 - ADAM_BETA1**step)
            for i in range(len(weights)):
                m_w[i] = ADAM_BETA1 * m_w[i] + (1 - ADAM_BETA1) * grad_w[i]
                v_w[i] = ADAM_BETA2 * v_w[i] + (1 - ADAM_BETA2) * grad_w[i] ** 2
                weights[i] -= scale * m_w[i] / (np.sqrt(v_w[i]) + ADAM_EPS)
                m_b[i] = ADAM_BETA1 * m_b[i] + (1 - ADAM_BETA1) * grad_b[i]
                v_b[i] = ADAM_BETA2 * v_b[i] + (1 - ADAM_BETA2) * grad_b[i] ** 2
                biases[i] -= scale * m_b[i] / (np.sqrt(v_b[i]) + ADAM_EPS)
    return MLPParams(tuple(weights), tuple(biases), label_order)


def evaluate(params: MLPParams, test: Sequence[tuple[np.ndarray, str]]) -> float:
    """Accuracy of argmax predictions; argmax ties go to the lowest index."""
    if not test:
        raise ValueError("test set is empty")
    xs = np.stack([np.asarray(vec, dtype=float) for vec, _ in test])
    probs = np.atleast_2d(forward(params, xs))
    predicted = probs.argmax(axis=1)
    hits = 0
    for pred, (_, label) in zip(predicted, test):
        try:
            target = params.label_index(label)
        except (ValueError, KeyError):
            continue  # label unseen in training can never be predicted
        hits += int(pred == target)
    return hits / len(test)


def per_example_loss(
    params: MLPParams, items: Sequence[tuple[np.ndarray, str]]
) -> list[float]:
    """Cross-entropy -log p(label) per item, probabilities clamped at 1e-12."""
    if not items:
        return []
    xs = np.stack([np.asarray(vec, dtype=float) for vec, _ in items])
    probs = np.atleast_2d(forward(params, xs))
    losses = []
    for row, (_, label) in enumerate(items):
        target = params.label_index(label)
        losses.append(float(-np.log(max(probs[row, target], PROB_FLOOR))))
    return losses


def save_params(path: str | Path, params: MLPParams) -> None:
    """Persist parameters as an .npz archive with a format version."""
    arrays = {"format_version": np.array(PARAMS_FORMAT_VERSION)}
    if params.labels is not None:
        arrays["labels"] = np.array(params.labels, dtype=object)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_params(path: str | Path) -> MLPParams:
    with np.load(path, allow_pickle=True) as archive:
        version = int(archive["format_version"])
        if version != PARAMS_FORMAT_VERSION:
            raise ValueError(f"unsupported params format version {version}")
        labels = tuple(archive["labels"]) if "labels" in archive else None
        n_layers = len(HIDDEN_DIMS) + 1
        weights = tuple(archive[f"w{i}"] for i in range(n_layers))
        biases = tuple(archive[f"b{i}"] for i in range(n_layers))
    return MLPParams(weights=weights, biases=biases, labels=labels)
