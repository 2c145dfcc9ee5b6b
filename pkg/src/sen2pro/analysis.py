"""Uncertainty analyses: feature importance by variance quintile, the corpus
fluctuation rate Q, the improvement score I, and the Q-versus-I sweep across
encoder configurations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._hashing import mix
from .core import CombinedEmbedding, EvalDataset, ProbEmbedding, ValidationError
from .embedding import DistanceConfig
from .encoder import EncoderConfig, build_weights, encode, encode_mc
from .estimator import estimate
from .evaluation import eval_scored_pairs

__all__ = [
    "FeatureGroup",
    "AnalysisRecord",
    "group_features",
    "feature_importance",
    "fluctuation_rate",
    "improvement_score",
    "q_vs_i_sweep",
]

GROUP_IDS = ("I", "II", "III", "IV", "V")

# Seed tag separating the sweep's model-uncertainty sampling stream from other
# derived streams.
_SWEEP_TAG = 0x71


@dataclass(frozen=True)
class FeatureGroup:
    group_id: str
    feature_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.group_id not in GROUP_IDS:
            raise ValidationError(f"group_id must be one of {GROUP_IDS}")
        idx = tuple(int(i) for i in self.feature_indices)
        if any(i < 0 for i in idx):
            raise ValidationError("feature indices must be >= 0")
        if len(set(idx)) != len(idx):
            raise ValidationError("feature indices must be distinct")
        object.__setattr__(self, "feature_indices", idx)


@dataclass(frozen=True)
class AnalysisRecord:
    metric: str
    value: float
    context: Mapping

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValidationError(f"analysis value for {self.metric!r} must be finite")
        object.__setattr__(self, "context", dict(self.context))

    def to_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value, "context": self.context}


def group_features(pe_set: Sequence[ProbEmbedding]) -> list[FeatureGroup]:
    """Partition feature indices into quintiles I..V by mean sigma_diag across
    the corpus, descending (I = highest uncertainty). Ties fall back to feature
    index order; the k mod 5 remainder goes to group V."""
    if not pe_set:
        raise ValidationError("group_features needs a non-empty corpus")
    k = pe_set[0].dim
    if any(pe.dim != k for pe in pe_set):
        raise ValidationError("all embeddings must share one dimension")
    if k < 5:
        raise ValidationError("need k >= 5 features to form quintiles")
    mean_sigma = np.stack([pe.sigma_diag for pe in pe_set]).mean(axis=0)
    order = np.argsort(-mean_sigma, kind="mergesort")  # stable: ties by index
    base = k // 5
    sizes = [base, base, base, base, k - 4 * base]
    groups, start = [], 0
    for gid, size in zip(GROUP_IDS, sizes):
        groups.append(
            FeatureGroup(group_id=gid, feature_indices=tuple(int(i) for i in order[start : start + size]))
        )
        start += size
    return groups


def _zero_features(ce: CombinedEmbedding, indices: Sequence[int]) -> CombinedEmbedding:
    mu = ce.mu.copy()
    sigma = ce.sigma_diag.copy()
    mu[list(indices)] = 0.0
    sigma[list(indices)] = 0.0
    return CombinedEmbedding(sentence_id=ce.sentence_id, mu=mu, sigma_diag=sigma)


def feature_importance(
    group: FeatureGroup,
    ds: EvalDataset,
    embeddings: Mapping[str, CombinedEmbedding],
    cfg: DistanceConfig,
) -> float:
    """|Spearman(all features) - Spearman(group zeroed in mu and sigma)|."""
    if not group.feature_indices:
        return 0.0
    full = eval_scored_pairs(ds, embeddings, cfg).spearman
    ablated = {s: _zero_features(ce, group.feature_indices) for s, ce in embeddings.items()}
    removed = eval_scored_pairs(ds, ablated, cfg).spearman
    return abs(full - removed)


def fluctuation_rate(pe_set: Sequence[ProbEmbedding]) -> float:
    """Grand mean of all model-uncertainty sigma_diag entries across the corpus."""
    if not pe_set:
        raise ValidationError("fluctuation rate needs a non-empty corpus")
    k = pe_set[0].dim
    for pe in pe_set:
        if pe.mode != "model":
            raise ValidationError(
                f"embedding {pe.sentence_id!r}: fluctuation rate is defined over "
                f"model-uncertainty estimates, got mode {pe.mode!r}"
            )
        if pe.dim != k:
            raise ValidationError("all embeddings must share one dimension")
    return float(np.stack([pe.sigma_diag for pe in pe_set]).mean())


def improvement_score(perf_sen2pro: float, perf_sen2vec: float) -> float:
    if not (np.isfinite(perf_sen2pro) and np.isfinite(perf_sen2vec)):
        raise ValidationError("improvement score needs finite performances")
    return perf_sen2pro - perf_sen2vec


def q_vs_i_sweep(
    configs: Sequence[EncoderConfig],
    ds: EvalDataset,
    seed: int,
    n: int = 15,
    cfg: DistanceConfig = DistanceConfig(),
) -> list[AnalysisRecord]:
    """(Q, I) per encoder configuration, on a scored-pairs dataset.

    The probabilistic side uses model-uncertainty sampling only, so that a
    dropout-free configuration collapses exactly onto its point-estimate
    baseline (Q=0 implies I=0). The baseline is the single deterministic
    encode scored by mean-l1 distance.
    """
    if not configs:
        raise ValidationError("sweep needs at least one configuration")
    if ds.kind != "scored_pairs":
        raise ValidationError(f"expected scored_pairs dataset, got {ds.kind}")
    sentences = sorted({s for rec in ds.records for s in (rec.sent_a, rec.sent_b)})
    baseline_cfg = DistanceConfig(alpha_mode="fixed", fixed_alpha=0.0)

    records: list[AnalysisRecord] = []
    for idx, enc_cfg in enumerate(configs):
        weights = build_weights(enc_cfg)
        master = mix(seed, _SWEEP_TAG)
        pes = [estimate(encode_mc(s, enc_cfg, weights, n, master)) for s in sentences]
        pro = {
            s: CombinedEmbedding(sentence_id=s, mu=pe.mu, sigma_diag=pe.sigma_diag)
            for s, pe in zip(sentences, pes)
        }
        vec = {
            s: CombinedEmbedding(
                sentence_id=s,
                mu=encode(s, enc_cfg, weights),
                sigma_diag=np.zeros(enc_cfg.d_model),
            )
            for s in sentences
        }
        q = fluctuation_rate(pes)
        improvement = improvement_score(
            eval_scored_pairs(ds, pro, cfg).spearman,
            eval_scored_pairs(ds, vec, baseline_cfg).spearman,
        )
        context = {
            "config_index": idx,
            "dropout_p": enc_cfg.dropout_p,
            "pooling": enc_cfg.pooling,
            "n": n,
        }
        records.append(AnalysisRecord(metric="fluctuation_Q", value=q, context=context))
        records.append(AnalysisRecord(metric="improvement_I", value=improvement, context=context))
    return records
