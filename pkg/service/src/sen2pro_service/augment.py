"""Word-level augmentation for the `augment` sampling mode.

Mirrors the client-side contract: each variant applies exactly one uniformly
chosen admissible operation (drop, swap, replace, insert). The service never
sees a corpus, so insertion/replacement words come from the sentence's own
token set. Whitespace-only sentences have no admissible operation and pass
through unchanged.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["augment_n", "variant_seed"]

_OPS = ("drop", "swap", "replace", "insert")


def variant_seed(seed: int, sentence: str, index: int) -> int:
    """Stable per-variant seed; independent of batch composition or order."""
    digest = hashlib.blake2b(
        f"{seed}\x00{sentence}\x00{index}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def _augment_once(tokens: list[str], vocab: list[str], rng: np.random.Generator) -> list[str]:
    # drop/swap need >= 2 tokens: drop may not empty the sentence, swap needs
    # two distinct positions
    ops = _OPS if len(tokens) >= 2 else ("replace", "insert")
    op = ops[int(rng.integers(len(ops)))]
    tokens = list(tokens)

    if op == "drop":
        del tokens[int(rng.integers(len(tokens)))]
    elif op == "swap":
        i = int(rng.integers(len(tokens)))
        j = int(rng.integers(len(tokens) - 1))
        if j >= i:  # uniform over unordered distinct pairs
            j += 1
        tokens[i], tokens[j] = tokens[j], tokens[i]
    elif op == "replace":
        i = int(rng.integers(len(tokens)))
        candidates = [w for w in vocab if w != tokens[i]]
        if candidates:
            tokens[i] = candidates[int(rng.integers(len(candidates)))]
    else:
        pos = int(rng.integers(len(tokens) + 1))
        tokens.insert(pos, vocab[int(rng.integers(len(vocab)))])

    return tokens


def augment_n(sentence: str, n: int, seed: int) -> list[str]:
    """n independent single-edit variants of one sentence."""
    tokens = sentence.split()
    if not tokens:
        return [sentence] * n
    vocab = sorted(set(tokens))
    out = []
    for i in range(n):
        rng = np.random.default_rng(variant_seed(seed, sentence, i))
        out.append(" ".join(_augment_once(tokens, vocab, rng)))
    return out
