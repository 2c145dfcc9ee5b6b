"""Word-level augmentation: drop, swap, replace, insert.

One operation per variant keeps the perturbation semantically light. All
choices are driven by a single integer seed, so a variant is a pure function
of (sentence, seed, vocab) — vocab order included.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ._hashing import mix, text_hash
from .core import ValidationError

__all__ = ["AUGMENT_OPS", "corpus_vocab", "augment_once", "augment_n"]

AUGMENT_OPS = ("drop", "swap", "replace", "insert")


def corpus_vocab(sentences: Iterable[str]) -> list[str]:
    """Distinct whitespace tokens over a corpus, sorted for determinism."""
    words = set()
    for sentence in sentences:
        words.update(sentence.split())
    return sorted(words)


def _admissible(n_tokens: int) -> list[str]:
    # drop/swap need >= 2 tokens: drop may not empty the sentence, swap needs
    # two distinct positions. replace/insert work on any non-empty sentence.
    if n_tokens >= 2:
        return list(AUGMENT_OPS)
    return ["replace", "insert"]


def augment_once(sentence: str, seed: int, vocab: Sequence[str]) -> str:
    """Apply one uniformly-chosen admissible operation.

    Whitespace-only input has no admissible operation and is returned as-is.
    """
    if not vocab:
        raise ValidationError("vocab must be non-empty")
    tokens = sentence.split()
    if not tokens:
        return sentence
    rng = np.random.default_rng(seed)
    ops = _admissible(len(tokens))
    op = ops[int(rng.integers(len(ops)))]

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

    return " ".join(tokens)


def augment_n(sentence: str, n: int, master_seed: int, vocab: Sequence[str]) -> list[str]:
    """n independent variants; variant i uses seed mix(master_seed, hash(sentence), i)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    base = text_hash(sentence)
    return [augment_once(sentence, mix(master_seed, base, i), vocab) for i in range(n)]
