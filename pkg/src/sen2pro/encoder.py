"""Deterministic tiny transformer encoder with seedable MC dropout.

Every source of randomness is an explicit integer seed: weights are a pure
function of (config, weight_seed), and each stochastic forward pass is a pure
function of (sentence, dropout_seed). This makes sampling reproducible across
runs, process boundaries, and any parallel execution schedule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from ._hashing import mix, text_hash
from .core import SampleSet, ValidationError

__all__ = [
    "EncoderConfig",
    "EncoderWeights",
    "load_encoder_config",
    "build_weights",
    "tokenize",
    "encode",
    "encode_mc",
]

POOLING_MODES = ("first_last_avg", "cls")

# Sinusoidal position entries live in [-1, 1] while token embeddings are
# uniform(-0.1, 0.1); scale positions down to the same magnitude so word
# identity is not swamped by word position.
_POS_SCALE = 0.1

# Fixed scale on the pooled output. Raw activations sit near 0.1, which makes
# sampled variances (squared units) microscopic next to mean differences and
# pushes the per-pair distance balance factor far above 1 — the opposite of
# realistic encoders, where variance magnitudes dominate and the factor sits
# in the few-percent range. Scaling the final vector restores that regime
# (means scale linearly, variances quadratically) without touching the
# forward dynamics.
_OUTPUT_SCALE = 2.0e4

CLS_ID = 0


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 1024
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 2
    d_ffn: int = 64
    max_len: int = 64
    dropout_p: float = 0.1
    pooling: str = "first_last_avg"
    weight_seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab_size < 3:
            raise ValidationError("vocab_size must be >= 3 (CLS + at least two word ids)")
        for name in ("d_model", "n_layers", "n_heads", "d_ffn", "max_len"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValidationError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValidationError("dropout_p must lie in [0, 1)")
        if self.pooling not in POOLING_MODES:
            raise ValidationError(f"pooling must be one of {POOLING_MODES}")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "EncoderConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ffn": self.d_ffn,
            "max_len": self.max_len,
            "dropout_p": self.dropout_p,
            "pooling": self.pooling,
            "weight_seed": self.weight_seed,
        }

    def with_dropout(self, p: float) -> "EncoderConfig":
        return replace(self, dropout_p=p)


def load_encoder_config(path: str | Path) -> EncoderConfig:
    with open(path, encoding="utf-8") as fh:
        return EncoderConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class EncoderWeights:
    """Parameter arrays keyed by name, all derived from the weight seed.

    Regenerating with an equal (config, weight_seed) yields identical arrays.
    Weights never hit disk; they are cheap to rebuild on demand.
    """

    params: Mapping[str, np.ndarray]
    shape_key: tuple = field(default=())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]


def _shape_key(config: EncoderConfig) -> tuple:
    # Fields that determine parameter shapes/values. dropout_p and pooling are
    # runtime choices and deliberately excluded.
    return (
        config.vocab_size,
        config.d_model,
        config.n_layers,
        config.n_heads,
        config.d_ffn,
        config.max_len,
        config.weight_seed,
    )


def _param(name: str, shape: tuple, weight_seed: int) -> np.ndarray:
    rng = np.random.default_rng(mix(weight_seed, text_hash(name)))
    arr = rng.uniform(-0.1, 0.1, size=shape)
    arr.setflags(write=False)
    return arr


def _sinusoidal_table(max_len: int, d_model: int) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, i / d_model)
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : d_model // 2])
    table *= _POS_SCALE
    table.setflags(write=False)
    return table


def build_weights(config: EncoderConfig) -> EncoderWeights:
    d, f = config.d_model, config.d_ffn
    seed = config.weight_seed
    params: dict[str, np.ndarray] = {
        "tok_emb": _param("tok_emb", (config.vocab_size, d), seed),
        "pos": _sinusoidal_table(config.max_len, d),
    }
    for layer in range(config.n_layers):
        p = f"layers.{layer}."
        for name, shape in (
            ("attn.wq", (d, d)),
            ("attn.wk", (d, d)),
            ("attn.wv", (d, d)),
            ("attn.wo", (d, d)),
            ("ffn.w1", (d, f)),
            ("ffn.w2", (f, d)),
        ):
            params[p + name] = _param(p + name, shape, seed)
        for name, shape in (
            ("attn.bq", (d,)),
            ("attn.bk", (d,)),
            ("attn.bv", (d,)),
            ("attn.bo", (d,)),
            ("ffn.b1", (f,)),
            ("ffn.b2", (d,)),
        ):
            params[p + name] = _param(p + name, shape, seed)
        # Layer norms start at the conventional identity transform.
        for name in ("ln1.gamma", "ln2.gamma"):
            g = np.ones(d)
            g.setflags(write=False)
            params[p + name] = g
        for name in ("ln1.beta", "ln2.beta"):
            b = np.zeros(d)
            b.setflags(write=False)
            params[p + name] = b
    return EncoderWeights(params=params, shape_key=_shape_key(config))


def tokenize(text: str, config: EncoderConfig) -> list[int]:
    """Hash-based tokenization: lowercase, split on whitespace, map each token
    to 1 + FNV1a64(token) mod (vocab_size - 2); CLS (id 0) is prepended and the
    sequence truncated to max_len."""
    ids = [CLS_ID]
    for token in text.lower().split():
        ids.append(1 + text_hash(token) % (config.vocab_size - 2))
    return ids[: config.max_len]


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return gamma * (x - mean) / np.sqrt(var + 1e-5) + beta


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class _Dropout:
    """Inverted dropout with masks drawn in a fixed forward-pass order."""

    def __init__(self, p: float, seed: int | None):
        self.p = p
        self.rng = None if (seed is None or p == 0.0) else np.random.default_rng(seed)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.rng is None:
            return x
        keep = self.rng.random(x.shape) >= self.p
        return x * keep / (1.0 - self.p)


def encode(
    sentence: str,
    config: EncoderConfig,
    weights: EncoderWeights,
    dropout_seed: int | None = None,
) -> np.ndarray:
    """One forward pass. With dropout_seed=None the pass is deterministic;
    with a seed, Bernoulli masks at the three dropout sites (embedding sum,
    attention output projection, FFN hidden activation) are fully determined
    by that seed."""
    if weights.shape_key != _shape_key(config):
        raise ValidationError("weights were built for a different encoder config")
    drop = _Dropout(config.dropout_p, dropout_seed)
    ids = tokenize(sentence, config)
    n, d, h = len(ids), config.d_model, config.n_heads
    dh = d // h

    x = weights["tok_emb"][ids] + weights["pos"][:n]
    x = drop(x)

    block_outputs = []
    for layer in range(config.n_layers):
        p = f"layers.{layer}."
        # pre-norm self-attention
        hn = _layer_norm(x, weights[p + "ln1.gamma"], weights[p + "ln1.beta"])
        q = (hn @ weights[p + "attn.wq"] + weights[p + "attn.bq"]).reshape(n, h, dh)
        k = (hn @ weights[p + "attn.wk"] + weights[p + "attn.bk"]).reshape(n, h, dh)
        v = (hn @ weights[p + "attn.wv"] + weights[p + "attn.bv"]).reshape(n, h, dh)
        q, k, v = (t.transpose(1, 0, 2) for t in (q, k, v))
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
        ctx = _softmax(scores) @ v  # (h, n, dh)
        ctx = ctx.transpose(1, 0, 2).reshape(n, d)
        x = x + drop(ctx @ weights[p + "attn.wo"] + weights[p + "attn.bo"])
        # pre-norm FFN
        hn = _layer_norm(x, weights[p + "ln2.gamma"], weights[p + "ln2.beta"])
        hidden = np.maximum(hn @ weights[p + "ffn.w1"] + weights[p + "ffn.b1"], 0.0)
        hidden = drop(hidden)
        x = x + hidden @ weights[p + "ffn.w2"] + weights[p + "ffn.b2"]
        block_outputs.append(x)

    if not np.isfinite(x).all():
        raise FloatingPointError("non-finite activation in encoder forward pass")

    if config.pooling == "cls":
        return block_outputs[-1][0] * _OUTPUT_SCALE
    first_last = (block_outputs[0] + block_outputs[-1]) / 2.0
    if n == 1:  # CLS-only input: nothing but position 0 to pool over
        return first_last[0] * _OUTPUT_SCALE
    return first_last[1:].mean(axis=0) * _OUTPUT_SCALE


def encode_mc(
    sentence: str,
    config: EncoderConfig,
    weights: EncoderWeights,
    n: int,
    master_seed: int,
    sentence_id: str | None = None,
) -> SampleSet:
    """n stochastic forward passes of one sentence.

    Sample i uses dropout seed mix(master_seed, hash(sentence), i), so results
    do not depend on evaluation order, corpus position, or parallelism.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    base = text_hash(sentence)
    rows = [encode(sentence, config, weights, mix(master_seed, base, i)) for i in range(n)]
    return SampleSet(
        sentence_id=sentence_id if sentence_id is not None else sentence,
        mode="model",
        samples=np.stack(rows),
    )
