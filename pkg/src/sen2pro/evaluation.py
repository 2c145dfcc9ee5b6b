"""Evaluation harness: rank correlations, retrieval ranking, analogy scoring,
system-level aggregation, and a frozen-feature linear probe.

Correlations are computed from first principles (no scipy dependency at
runtime); the test suite cross-checks them against an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    CombinedEmbedding,
    DegenerateInputError,
    EvalDataset,
    ValidationError,
)
from .embedding import DistanceConfig, distance, similarity_score

__all__ = [
    "CorrelationResult",
    "RankResult",
    "Probe",
    "correlation",
    "eval_scored_pairs",
    "eval_rank",
    "analogy_x",
    "eval_analogy",
    "system_score",
    "train_probe",
    "probe_predict",
    "probe_accuracy",
]


@dataclass(frozen=True)
class CorrelationResult:
    spearman: float
    pearson: float
    n: int

    def __post_init__(self) -> None:
        for name in ("spearman", "pearson"):
            v = getattr(self, name)
            if not np.isfinite(v) or not -1.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [-1, 1]")
        if self.n < 2:
            raise ValidationError("correlation needs n >= 2")


@dataclass(frozen=True)
class RankResult:
    mrr: float
    hits_at: Mapping[int, float]

    def __post_init__(self) -> None:
        if not 0.0 < self.mrr <= 1.0:
            raise ValidationError(f"mrr={self.mrr} outside (0, 1]")
        hits = dict(sorted(self.hits_at.items()))
        prev = 0.0
        for k, v in hits.items():
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"hits@{k}={v} outside [0, 1]")
            if v < prev:
                raise ValidationError("hits@k must be non-decreasing in k")
            prev = v
        object.__setattr__(self, "hits_at", hits)


def _ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks, 1-based; ties share the mean of their rank positions."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray, what: str) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    ssx = float(xc @ xc)
    ssy = float(yc @ yc)
    if ssx == 0.0 or ssy == 0.0:
        raise DegenerateInputError(f"degenerate input: zero variance in {what}")
    r = float(xc @ yc) / np.sqrt(ssx * ssy)
    return float(np.clip(r, -1.0, 1.0))


def correlation(pred: Sequence[float], gold: Sequence[float]) -> CorrelationResult:
    """Pearson on the raw values; Spearman = Pearson on average-ranked values."""
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValidationError("pred and gold must be equal-length 1-D sequences")
    if len(x) < 2:
        raise ValidationError("correlation needs at least 2 observations")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValidationError("correlation inputs must be finite")
    return CorrelationResult(
        spearman=_pearson(_ranks(x), _ranks(y), "ranked data"),
        pearson=_pearson(x, y, "raw data"),
        n=len(x),
    )


def _lookup(embeddings: Mapping[str, CombinedEmbedding], sentence: str) -> CombinedEmbedding:
    try:
        return embeddings[sentence]
    except KeyError:
        raise ValidationError(f"no embedding for sentence {sentence!r}") from None


def eval_scored_pairs(
    ds: EvalDataset,
    embeddings: Mapping[str, CombinedEmbedding],
    cfg: DistanceConfig,
) -> CorrelationResult:
    if ds.kind != "scored_pairs":
        raise ValidationError(f"expected scored_pairs dataset, got {ds.kind}")
    preds = [
        similarity_score(_lookup(embeddings, r.sent_a), _lookup(embeddings, r.sent_b), cfg)
        for r in ds.records
    ]
    return correlation(preds, [r.gold for r in ds.records])


def eval_rank(
    ds: EvalDataset,
    embeddings: Mapping[str, CombinedEmbedding],
    cfg: DistanceConfig,
    hits_ks: Sequence[int] = (1, 3, 10),
) -> RankResult:
    """Rank each pool by ascending distance to its query (ties broken by pool
    index) and aggregate the positive's rank into MRR and Hits@k."""
    if ds.kind != "rank_pools":
        raise ValidationError(f"expected rank_pools dataset, got {ds.kind}")
    if not ds.records:
        raise ValidationError("empty rank_pools dataset")
    reciprocal, ranks = [], []
    for rec in ds.records:
        query = _lookup(embeddings, rec.query)
        dists = np.array(
            [distance(query, _lookup(embeddings, cand), cfg) for cand in rec.pool]
        )
        order = np.argsort(dists, kind="mergesort")  # stable = pool-index tie-break
        pos_index = rec.pool.index(rec.positive)
        rank = int(np.nonzero(order == pos_index)[0][0]) + 1
        ranks.append(rank)
        reciprocal.append(1.0 / rank)
    hits = {int(k): float(np.mean([r <= k for r in ranks])) for k in hits_ks}
    return RankResult(mrr=float(np.mean(reciprocal)), hits_at=hits)


def _unit(mu: np.ndarray, which: str) -> np.ndarray:
    norm = float(np.linalg.norm(mu))
    if norm == 0.0:
        raise DegenerateInputError(f"unnormalizable: zero-norm mu for {which}")
    return mu / norm


def analogy_x(
    a: CombinedEmbedding, b: CombinedEmbedding, c: CombinedEmbedding, d: CombinedEmbedding
) -> float:
    """l2 distance gap ||A-B|| - ||C-D|| on l2-normalized means."""
    if not (a.dim == b.dim == c.dim == d.dim):
        raise ValidationError("analogy embeddings must share one dimension")
    d_ab = float(np.linalg.norm(_unit(a.mu, "A") - _unit(b.mu, "B")))
    d_cd = float(np.linalg.norm(_unit(c.mu, "C") - _unit(d.mu, "D")))
    return d_ab - d_cd


def eval_analogy(
    ds: EvalDataset, embeddings: Mapping[str, CombinedEmbedding]
) -> tuple[float, list[float]]:
    """Dataset score = mean |x| over quadruples; per-quad values returned too."""
    if ds.kind != "analogy_quads":
        raise ValidationError(f"expected analogy_quads dataset, got {ds.kind}")
    if not ds.records:
        raise ValidationError("empty analogy dataset")
    xs = [
        analogy_x(*(_lookup(embeddings, s) for s in (rec.a, rec.b, rec.c, rec.d)))
        for rec in ds.records
    ]
    return float(np.mean(np.abs(xs))), xs


def system_score(
    segments: Sequence[tuple[str, str]],
    embeddings: Mapping[str, CombinedEmbedding],
    cfg: DistanceConfig,
) -> float:
    """System-level score = mean segment similarity over (hypothesis, reference)."""
    if not segments:
        raise ValidationError("system_score needs at least one segment")
    sims = [
        similarity_score(_lookup(embeddings, hyp), _lookup(embeddings, ref), cfg)
        for hyp, ref in segments
    ]
    return float(np.mean(sims))


# ---------------------------------------------------------------------------
# frozen-feature linear probe


@dataclass(frozen=True)
class Probe:
    """Multinomial logistic regression over z-scored frozen features.

    feat_mean/feat_scale are the training-set statistics; they travel with the
    probe so test features are standardized identically.
    """

    weights: np.ndarray  # (classes, feature_dim)
    bias: np.ndarray  # (classes,)
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    lr: float
    epochs: int
    seed: int

    def __post_init__(self) -> None:
        for name in ("weights", "bias", "feat_mean", "feat_scale"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ValidationError(f"probe {name} contains non-finite values")
            object.__setattr__(self, name, arr)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _feature_matrix(features: Sequence[np.ndarray]) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("features must all share one dimension")
    return x


def train_probe(
    features: Sequence[np.ndarray],
    labels: Sequence[int],
    classes: int,
    lr: float = 0.1,
    epochs: int = 200,
    seed: int = 0,
) -> Probe:
    """Full-batch gradient descent from zero-initialized parameters.

    Deterministic: the seed is recorded as metadata only (zero init leaves
    nothing to randomize), which keeps invariance properties exact.
    """
    x = _feature_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1 or len(y) != len(x):
        raise ValidationError("labels must align with features")
    if classes < 2:
        raise ValidationError("need at least 2 classes")
    if y.min() < 0 or y.max() >= classes:
        raise ValidationError("labels must lie in [0, classes)")
    counts = np.bincount(y, minlength=classes)
    if (counts == 0).any():
        missing = int(np.nonzero(counts == 0)[0][0])
        raise ValidationError(f"class {missing} has zero training examples")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    xz = (x - mean) / scale

    onehot = np.eye(classes)[y]
    w = np.zeros((classes, x.shape[1]))
    b = np.zeros(classes)
    for _ in range(epochs):
        probs = _softmax_rows(xz @ w.T + b)
        err = probs - onehot  # (n, classes)
        w -= lr * (err.T @ xz) / len(xz)
        b -= lr * err.mean(axis=0)
    return Probe(
        weights=w, bias=b, feat_mean=mean, feat_scale=scale,
        lr=lr, epochs=epochs, seed=seed,
    )


def probe_predict(probe: Probe, features: Sequence[np.ndarray]) -> np.ndarray:
    x = _feature_matrix(features)
    if x.shape[1] != probe.weights.shape[1]:
        raise ValidationError(
            f"feature dim {x.shape[1]} does not match probe dim {probe.weights.shape[1]}"
        )
    xz = (x - probe.feat_mean) / probe.feat_scale
    logits = xz @ probe.weights.T + probe.bias
    # np.argmax breaks ties toward the lowest class index
    return logits.argmax(axis=1)


def probe_accuracy(
    probe: Probe, features: Sequence[np.ndarray], labels: Sequence[int]
) -> float:
    y = np.asarray(labels, dtype=np.int64)
    pred = probe_predict(probe, features)
    if len(y) != len(pred):
        raise ValidationError("labels must align with features")
    return float((pred == y).mean())
