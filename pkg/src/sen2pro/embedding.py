"""Combined embeddings, the uncertainty-aware distance, and feature export.

The distance mixes an l1 term over means with an l1 term over diagonal
covariances. Its balance factor is either computed per pair (ratio of the two
l1 terms) or held fixed; fixed alpha=0 reduces to the plain mean-l1 distance
used as the point-estimate baseline throughout the evaluation suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CombinedEmbedding, ProbEmbedding, ValidationError

__all__ = [
    "DistanceConfig",
    "combine",
    "feature_vector",
    "alpha",
    "distance",
    "similarity_score",
]

ALPHA_MODES = ("per_pair", "fixed")


@dataclass(frozen=True)
class DistanceConfig:
    alpha_mode: str = "per_pair"
    fixed_alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha_mode not in ALPHA_MODES:
            raise ValidationError(f"alpha_mode must be one of {ALPHA_MODES}")
        if not np.isfinite(self.fixed_alpha) or self.fixed_alpha < 0:
            raise ValidationError("fixed_alpha must be finite and >= 0")

    def to_dict(self) -> dict:
        return {"alpha_mode": self.alpha_mode, "fixed_alpha": self.fixed_alpha}

    @classmethod
    def from_dict(cls, obj) -> "DistanceConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


def combine(model_pe: ProbEmbedding, data_pe: ProbEmbedding) -> CombinedEmbedding:
    """Average the two per-mode Gaussians coordinate-wise."""
    if model_pe.mode != "model" or data_pe.mode != "data":
        raise ValidationError(
            f"combine needs (model, data) estimates, got ({model_pe.mode}, {data_pe.mode})"
        )
    if model_pe.sentence_id != data_pe.sentence_id:
        raise ValidationError(
            f"sentence_id mismatch: {model_pe.sentence_id!r} vs {data_pe.sentence_id!r}"
        )
    if model_pe.dim != data_pe.dim:
        raise ValidationError(
            f"embedding {model_pe.sentence_id!r}: dim {model_pe.dim} vs {data_pe.dim}"
        )
    return CombinedEmbedding(
        sentence_id=model_pe.sentence_id,
        mu=(model_pe.mu + data_pe.mu) / 2.0,
        sigma_diag=(model_pe.sigma_diag + data_pe.sigma_diag) / 2.0,
    )


def feature_vector(ce: CombinedEmbedding) -> np.ndarray:
    """Concatenation [mu; sigma_diag], length 2k."""
    return np.concatenate([ce.mu, ce.sigma_diag])


def _l1(x: np.ndarray) -> float:
    return float(np.abs(x).sum())


def _check_pair(a: CombinedEmbedding, b: CombinedEmbedding) -> None:
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")


def alpha(a: CombinedEmbedding, b: CombinedEmbedding, cfg: DistanceConfig) -> float:
    """Balance factor. Per-pair mode: l1(mu_a-mu_b)/l1(sigma_a-sigma_b), with
    a zero denominator mapping to 0 (no covariance signal -> pure mean term)."""
    _check_pair(a, b)
    if cfg.alpha_mode == "fixed":
        return cfg.fixed_alpha
    l_sigma = _l1(a.sigma_diag - b.sigma_diag)
    if l_sigma == 0.0:
        return 0.0
    return _l1(a.mu - b.mu) / l_sigma


def distance(a: CombinedEmbedding, b: CombinedEmbedding, cfg: DistanceConfig) -> float:
    """(1-alpha) * l1(mu_a-mu_b) + alpha * l1(sigma_a-sigma_b).

    Symmetric, and zero when a == b. With per-pair alpha this equals
    (2 - L_mu/L_sigma) * L_mu, which is not a metric and may go negative when
    the mean term dominates; the value is reported as-is.
    """
    _check_pair(a, b)
    a_val = alpha(a, b, cfg)
    l_mu = _l1(a.mu - b.mu)
    l_sigma = _l1(a.sigma_diag - b.sigma_diag)
    return (1.0 - a_val) * l_mu + a_val * l_sigma


def similarity_score(a: CombinedEmbedding, b: CombinedEmbedding, cfg: DistanceConfig) -> float:
    """Negated distance; monotone decreasing in distance, 0 for identical inputs."""
    return -distance(a, b, cfg)
