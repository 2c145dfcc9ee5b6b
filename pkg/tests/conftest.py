"""Shared fixtures: bundled data paths, small corpora, and cheap embeddings."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sen2pro.core import CombinedEmbedding
from sen2pro.encoder import EncoderConfig
from sen2pro.pipeline import PipelineConfig, embed_corpus, embeddings_by_text

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "sen2pro" / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def tiny_corpus() -> list[str]:
    return [
        "a quick brown fox",
        "jumps over the lazy dog",
        "pack my box with jugs",
        "five dozen liquor jugs",
        "how vexingly quick",
        "daft zebras jump",
    ]


@pytest.fixture(scope="session")
def tiny_embeddings(tiny_corpus) -> dict[str, CombinedEmbedding]:
    """Combined embeddings for tiny_corpus, keyed by sentence text."""
    cfg = PipelineConfig(
        backend="toy",
        n_model=8,
        n_data=8,
        master_seed=11,
        encoder=EncoderConfig(dropout_p=0.1, weight_seed=11),
    )
    return embeddings_by_text(tiny_corpus, embed_corpus(tiny_corpus, cfg))


def random_combined(rng: np.random.Generator, k: int = 6) -> CombinedEmbedding:
    """One random CombinedEmbedding; sigma entries are non-negative."""
    return CombinedEmbedding(
        sentence_id="r",
        mu=rng.normal(size=k),
        sigma_diag=np.abs(rng.normal(size=k)),
    )
