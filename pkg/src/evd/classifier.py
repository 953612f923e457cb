"""Hashed-feature linear detector with 50/50 oversampling.

Context and block tokens live in disjoint halves of the feature space so the
model can weigh the same token differently on either side of the split. The
scorer is a sigmoid over a sparse linear response; training is plain SGD on
binary cross entropy. A transformer backend can replace this behind the same
train/score interface.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from evd.corpus import TrainingTriplet
from evd.encoder import Vocabulary, encode_classifier
from evd.kernel import dot_select

MODEL_FORMAT_VERSION = 1


class ClassifierError(Exception):
    pass


@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray  # shape (2 * vocab.size,), float64
    bias: float
    vocabulary: Vocabulary
    version: int = MODEL_FORMAT_VERSION
    cwe_heads: dict | None = None  # cwe -> (weights, bias), optional

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.5
    seed: int = 0
    threshold: float = 0.5
    batch_size: int = 32
    per_cwe: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


@dataclass(frozen=True)
class EpochCursor:
    position: int = 0
    epoch: int = 0


@dataclass(frozen=True)
class Detection:
    verdict: str  # "vulnerable" | "clean"
    score: float
    elapsed_ms: float
    cwe: str | None = None
    explanation: str | None = None


def featurize(context: str, block: str, vocabulary: Vocabulary) -> np.ndarray:
    """Feature indices (with multiplicity) for a context/block pair."""
    seq = encode_classifier(context, block, vocabulary)
    ctx = np.fromiter(seq.context_ids, dtype=np.int64, count=seq.n_context)
    blk = np.fromiter(seq.block_ids, dtype=np.int64, count=seq.n_block)
    return np.concatenate([ctx, blk + vocabulary.size])


def make_epoch(vuln_pool: list, nonvuln_pool: list, cursor: EpochCursor) -> tuple[list, EpochCursor]:
    """All vulnerable examples plus |V| non-vulnerable ones taken cyclically."""
    if not vuln_pool:
        raise ClassifierError("oversampling is undefined without vulnerable examples")
    if not nonvuln_pool:
        raise ClassifierError("non-vulnerable pool is empty")
    n = len(nonvuln_pool)
    take = len(vuln_pool)
    picked = [nonvuln_pool[(cursor.position + i) % n] for i in range(take)]
    new_cursor = EpochCursor(position=(cursor.position + take) % n, epoch=cursor.epoch + 1)
    return list(vuln_pool) + picked, new_cursor


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _response(weights: np.ndarray, bias: float, indices: np.ndarray) -> float:
    return dot_select(weights, indices) + bias


def bce_loss(weights: np.ndarray, bias: float, indices: np.ndarray, label: float) -> float:
    p = _sigmoid(_response(weights, bias, indices))
    eps = 1e-12
    return -(label * math.log(p + eps) + (1.0 - label) * math.log(1.0 - p + eps))


def bce_gradient(
    weights: np.ndarray, bias: float, indices: np.ndarray, label: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """Sparse analytic gradient: per-index values plus the bias component."""
    p = _sigmoid(_response(weights, bias, indices))
    residual = p - label
    uniq, counts = np.unique(indices, return_counts=True)
    return uniq, residual * counts.astype(np.float64), residual


def _train_binary(
    examples: list[tuple[np.ndarray, float]],
    vocabulary: Vocabulary,
    config: TrainConfig,
) -> tuple[np.ndarray, float]:
    vuln = [e for e in examples if e[1] == 1.0]
    nonvuln = [e for e in examples if e[1] == 0.0]
    weights = np.zeros(2 * vocabulary.size, dtype=np.float64)
    bias = 0.0
    cursor = EpochCursor()
    rng = random.Random(config.seed)
    for _ in range(config.epochs):
        epoch, cursor = make_epoch(vuln, nonvuln, cursor)
        rng.shuffle(epoch)
        for start in range(0, len(epoch), config.batch_size):
            batch = epoch[start : start + config.batch_size]
            grad_bias = 0.0
            updates: dict[int, float] = {}
            for indices, label in batch:
                uniq, values, g_bias = bce_gradient(weights, bias, indices, label)
                for i, v in zip(uniq.tolist(), values.tolist()):
                    updates[i] = updates.get(i, 0.0) + v
                grad_bias += g_bias
            scale = config.learning_rate / len(batch)
            for i, v in updates.items():
                weights[i] -= scale * v
            bias -= scale * grad_bias
    return weights, bias


def train(triplets: list[TrainingTriplet], config: TrainConfig, vocabulary: Vocabulary | None = None) -> ModelParams:
    """Fit the detector; deterministic under config.seed."""
    if vocabulary is None:
        vocabulary = Vocabulary()
    if not any(t.label.is_vulnerable for t in triplets) or all(
        t.label.is_vulnerable for t in triplets
    ):
        raise ClassifierError("training needs at least one vulnerable and one clean example")
    examples = [
        (featurize(t.context, t.block, vocabulary), 1.0 if t.label.is_vulnerable else 0.0)
        for t in triplets
    ]
    weights, bias = _train_binary(examples, vocabulary, config)
    cwe_heads = None
    if config.per_cwe:
        cwe_heads = {}
        for cwe in sorted({t.label.cwe for t in triplets if t.label.is_vulnerable}):
            head_examples = [
                (feats, 1.0 if (t.label.is_vulnerable and t.label.cwe == cwe) else 0.0)
                for (feats, _), t in zip(examples, triplets)
            ]
            cwe_heads[cwe] = _train_binary(head_examples, vocabulary, config)
    return ModelParams(weights=weights, bias=bias, vocabulary=vocabulary, cwe_heads=cwe_heads)


def score(params: ModelParams, context: str, block: str) -> float:
    indices = featurize(context, block, params.vocabulary)
    return _sigmoid(_response(params.weights, params.bias, indices))


def score_per_cwe(params: ModelParams, context: str, block: str) -> dict[str, float]:
    if not params.cwe_heads:
        raise ClassifierError("model was trained without per-CWE heads")
    indices = featurize(context, block, params.vocabulary)
    return {
        cwe: _sigmoid(_response(w, b, indices)) for cwe, (w, b) in params.cwe_heads.items()
    }


def detect(params: ModelParams, context: str, block: str, threshold: float) -> Detection:
    if not 0.0 <= threshold <= 1.0:
        raise ClassifierError("threshold must lie in [0, 1]")
    started = time.perf_counter()
    value = score(params, context, block)
    cwe = None
    if value >= threshold and params.cwe_heads:
        by_cwe = score_per_cwe(params, context, block)
        cwe = max(by_cwe, key=by_cwe.get)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    verdict = "vulnerable" if value >= threshold else "clean"
    return Detection(verdict=verdict, score=value, elapsed_ms=elapsed_ms, cwe=cwe)


def finite_difference_check(
    params: ModelParams,
    example: tuple[np.ndarray, float],
    step: float = 1e-5,
    max_coords: int = 32,
) -> float:
    """Max |analytic - central difference| over sampled weights plus the bias."""
    indices, label = example
    uniq, values, grad_bias = bce_gradient(params.weights, params.bias, indices, label)
    analytic = dict(zip(uniq.tolist(), values.tolist()))
    coords = uniq.tolist()[:max_coords]
    worst = 0.0
    weights = params.weights.copy()
    for i in coords:
        orig = weights[i]
        weights[i] = orig + step
        up = bce_loss(weights, params.bias, indices, label)
        weights[i] = orig - step
        down = bce_loss(weights, params.bias, indices, label)
        weights[i] = orig
        fd = (up - down) / (2.0 * step)
        worst = max(worst, abs(fd - analytic[i]) / max(1.0, abs(analytic[i])))
    up = bce_loss(weights, params.bias + step, indices, label)
    down = bce_loss(weights, params.bias - step, indices, label)
    fd = (up - down) / (2.0 * step)
    worst = max(worst, abs(fd - grad_bias) / max(1.0, abs(grad_bias)))
    return worst


def save_model(path: str | Path, params: ModelParams):
    vocab = params.vocabulary
    np.savez_compressed(
        Path(path),
        format_version=np.int64(params.version),
        weights=params.weights,
        bias=np.float64(params.bias),
        vocab_size=np.int64(vocab.size),
        max_sequence_length=np.int64(vocab.max_sequence_length),
        hashed=np.int64(vocab.hashed),
        tokens=np.array(list(vocab.tokens), dtype=object),
        cwe_names=np.array(sorted(params.cwe_heads) if params.cwe_heads else [], dtype=object),
        **(
            {
                f"cwe_w_{cwe}": w
                for cwe, (w, _) in (params.cwe_heads or {}).items()
            }
        ),
        **(
            {
                f"cwe_b_{cwe}": np.float64(b)
                for cwe, (_, b) in (params.cwe_heads or {}).items()
            }
        ),
    )


def load_model(path: str | Path) -> ModelParams:
    path = Path(path)
    if not path.is_file():
        raise ClassifierError(f"model file not found: {path}")
    with np.load(path, allow_pickle=True) as data:
        version = int(data["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ClassifierError(f"unsupported model format version: {version}")
        vocab = Vocabulary(
            size=int(data["vocab_size"]),
            max_sequence_length=int(data["max_sequence_length"]),
            hashed=bool(int(data["hashed"])),
            tokens=tuple(data["tokens"].tolist()),
        )
        cwe_names = data["cwe_names"].tolist()
        heads = (
            {cwe: (data[f"cwe_w_{cwe}"], float(data[f"cwe_b_{cwe}"])) for cwe in cwe_names}
            or None
        )
        return ModelParams(
            weights=data["weights"],
            bias=float(data["bias"]),
            vocabulary=vocab,
            version=version,
            cwe_heads=heads,
        )
