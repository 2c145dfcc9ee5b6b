"""Corpus orchestration: sentences -> per-mode sample sets -> Gaussian
estimates -> combined embeddings, over either the in-process toy encoder or a
remote encoder service, with optional on-disk sample caching.

Seeding discipline: the master seed is split per uncertainty mode, and every
per-sentence/per-sample seed is derived from sentence *content*, so outputs
are a pure function of (corpus, config) no matter how work is scheduled.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._hashing import MODE_TAGS, mix, text_hash
from .analysis import AnalysisRecord
from .augment import augment_n, corpus_vocab
from .client import EmbedRequest, fetch_samples, health_check
from .core import (
    CombinedEmbedding,
    EvalDataset,
    SampleSet,
    ValidationError,
    load_sample_set,
    save_sample_set,
)
from .embedding import DistanceConfig, combine
from .encoder import EncoderConfig, build_weights, encode, encode_mc
from .estimator import estimate
from .evaluation import eval_scored_pairs

__all__ = [
    "PipelineConfig",
    "load_pipeline_config",
    "ToyBackend",
    "RemoteBackend",
    "make_backend",
    "embed_corpus",
    "embeddings_by_text",
    "sampling_sweep",
]

BACKENDS = ("toy", "remote")


@dataclass(frozen=True)
class PipelineConfig:
    backend: str = "toy"
    n_model: int = 15
    n_data: int = 15
    master_seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    endpoint: str | None = None
    pooling: str = "first_last_avg"  # remote pooling; toy uses encoder.pooling
    distance: DistanceConfig = field(default_factory=DistanceConfig)
    cache_dir: str | None = None
    batch_size: int = 32
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}")
        if self.n_model < 1 or self.n_data < 1:
            raise ValidationError("n_model and n_data must be >= 1")
        if self.batch_size < 1 or self.max_in_flight < 1:
            raise ValidationError("batch_size and max_in_flight must be >= 1")
        if self.backend == "remote" and not self.endpoint:
            raise ValidationError("remote backend requires an endpoint")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "PipelineConfig":
        kwargs = dict(obj)
        if isinstance(kwargs.get("encoder"), Mapping):
            kwargs["encoder"] = EncoderConfig.from_dict(kwargs["encoder"])
        if isinstance(kwargs.get("distance"), Mapping):
            kwargs["distance"] = DistanceConfig.from_dict(kwargs["distance"])
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in kwargs.items() if k in known})

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "n_model": self.n_model,
            "n_data": self.n_data,
            "master_seed": self.master_seed,
            "encoder": self.encoder.to_dict(),
            "endpoint": self.endpoint,
            "pooling": self.pooling,
            "distance": self.distance.to_dict(),
            "cache_dir": self.cache_dir,
            "batch_size": self.batch_size,
            "max_in_flight": self.max_in_flight,
        }


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))


class ToyBackend:
    """In-process deterministic encoder backend."""

    def __init__(self, encoder_cfg: EncoderConfig):
        self.cfg = encoder_cfg
        self.weights = build_weights(encoder_cfg)
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def digest(self) -> int:
        return text_hash("toy:" + json.dumps(self.cfg.to_dict(), sort_keys=True))

    def _count(self) -> None:
        with self._lock:
            self.calls += 1

    def sample(
        self,
        sentence: str,
        sentence_id: str,
        mode: str,
        n: int,
        mode_seed: int,
        vocab: Sequence[str],
    ) -> SampleSet:
        self._count()
        if mode == "model":
            return encode_mc(sentence, self.cfg, self.weights, n, mode_seed, sentence_id)
        if mode == "data":
            # augmented surface forms through the *fixed* encoder: no dropout
            variants = augment_n(sentence, n, mode_seed, vocab)
            rows = [encode(v, self.cfg, self.weights) for v in variants]
            return SampleSet(sentence_id=sentence_id, mode="data", samples=np.stack(rows))
        if mode == "plain":
            row = encode(sentence, self.cfg, self.weights)
            return SampleSet(sentence_id=sentence_id, mode="plain", samples=row[None, :])
        raise ValidationError(f"unknown sampling mode {mode!r}")


_WIRE_MODE = {"model": "mc_dropout", "data": "augment", "plain": "plain"}


class RemoteBackend:
    """Batching HTTP backend; one counted call per POST."""

    def __init__(self, endpoint: str, pooling: str = "first_last_avg", timeout: float = 60.0):
        self.endpoint = endpoint
        self.pooling = pooling
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()
        self._dim: int | None = None

    @property
    def digest(self) -> int:
        return text_hash(f"remote:{self.endpoint}:{self.pooling}")

    def _count(self) -> None:
        with self._lock:
            self.calls += 1

    def health(self) -> dict:
        info = health_check(self.endpoint, timeout=self.timeout)
        self._note_dim(info["dim"])
        return info

    def _note_dim(self, dim: int) -> None:
        with self._lock:
            if self._dim is None:
                self._dim = dim
            elif self._dim != dim:
                raise ValidationError(
                    f"backend dimension changed between batches: {self._dim} vs {dim}"
                )

    def sample_batch(
        self,
        sentences: Sequence[str],
        sentence_ids: Sequence[str],
        mode: str,
        n: int,
        mode_seed: int,
    ) -> list[SampleSet]:
        self._count()
        req = EmbedRequest(
            sentences=tuple(sentences),
            mode=_WIRE_MODE[mode],
            n=n,
            seed=mode_seed,
            pooling=self.pooling,
        )
        sets = fetch_samples(req, self.endpoint, timeout=self.timeout, sentence_ids=sentence_ids)
        self._note_dim(sets[0].dim)
        return sets


def make_backend(cfg: PipelineConfig):
    if cfg.backend == "toy":
        return ToyBackend(cfg.encoder)
    return RemoteBackend(cfg.endpoint, pooling=cfg.pooling)


# ---------------------------------------------------------------------------
# sample cache


class _SampleCache:
    def __init__(self, directory: str | Path | None):
        self.dir = Path(directory) if directory else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def key(self, sentence: str, mode: str, n: int, mode_seed: int,
            backend_digest: int, vocab_digest: int) -> str:
        return format(
            mix(text_hash(sentence), MODE_TAGS[mode], n, mode_seed, backend_digest, vocab_digest),
            "016x",
        )

    def load(self, key: str, sentence_id: str) -> SampleSet | None:
        if self.dir is None:
            return None
        path = self.dir / f"{key}.jsonl"
        if not path.exists():
            return None
        cached = load_sample_set(path)
        # cache is keyed by content; the id depends on corpus position
        return replace(cached, sentence_id=sentence_id)

    def store(self, key: str, sample_set: SampleSet) -> None:
        if self.dir is None:
            return
        save_sample_set(sample_set, self.dir / f"{key}.jsonl")


# ---------------------------------------------------------------------------
# orchestration


def _mode_seeds(master_seed: int) -> dict[str, int]:
    return {mode: mix(master_seed, tag) for mode, tag in MODE_TAGS.items()}


def embed_corpus(
    sentences: Sequence[str],
    cfg: PipelineConfig,
    jobs: int = 1,
    backend=None,
) -> dict[str, CombinedEmbedding]:
    """Embed a corpus; sentence ids are positions ("0", "1", ...).

    Deterministic in (sentences, cfg) for the toy backend regardless of jobs;
    remote determinism is delegated to the service's seed handling.
    """
    if not sentences:
        raise ValidationError("corpus must be non-empty")
    if jobs < 1:
        raise ValidationError("jobs must be >= 1")
    backend = backend if backend is not None else make_backend(cfg)
    cache = _SampleCache(cfg.cache_dir)
    vocab = corpus_vocab(sentences)
    # remote augmentation happens server-side on per-sentence vocabulary, so
    # the corpus vocabulary must not leak into remote cache keys
    vocab_digest = (
        text_hash("\x00".join(vocab)) if isinstance(backend, ToyBackend) else 0
    )
    seeds = _mode_seeds(cfg.master_seed)
    plan = {"model": cfg.n_model, "data": cfg.n_data}

    ids = [str(i) for i in range(len(sentences))]
    sets: dict[tuple[str, str], SampleSet] = {}
    jobs_effective = max(1, min(jobs, len(sentences)))

    def cache_key(sentence: str, mode: str) -> str:
        return cache.key(sentence, mode, plan[mode], seeds[mode], backend.digest, vocab_digest)

    if isinstance(backend, ToyBackend):
        def work(item: tuple[str, str, str]) -> tuple[tuple[str, str], SampleSet]:
            sid, sentence, mode = item
            key = cache_key(sentence, mode)
            ss = cache.load(key, sid)
            if ss is None:
                ss = backend.sample(sentence, sid, mode, plan[mode], seeds[mode], vocab)
                cache.store(key, ss)
            return (sid, mode), ss

        items = [(sid, s, mode) for sid, s in zip(ids, sentences) for mode in ("model", "data")]
        if jobs_effective == 1:
            results = map(work, items)
        else:
            with ThreadPoolExecutor(max_workers=jobs_effective) as pool:
                results = list(pool.map(work, items))
        sets.update(dict(results))
    else:
        for mode in ("model", "data"):
            missing: list[tuple[str, str]] = []
            for sid, sentence in zip(ids, sentences):
                ss = cache.load(cache_key(sentence, mode), sid)
                if ss is None:
                    missing.append((sid, sentence))
                else:
                    sets[(sid, mode)] = ss
            chunks = [
                missing[i : i + cfg.batch_size]
                for i in range(0, len(missing), cfg.batch_size)
            ]

            def fetch(chunk: list[tuple[str, str]], mode=mode) -> list[SampleSet]:
                return backend.sample_batch(
                    [s for _, s in chunk], [sid for sid, _ in chunk],
                    mode, plan[mode], seeds[mode],
                )

            if chunks:
                with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
                    for chunk, fetched in zip(chunks, pool.map(fetch, chunks)):
                        for (sid, sentence), ss in zip(chunk, fetched):
                            sets[(sid, mode)] = ss
                            cache.store(cache_key(sentence, mode), ss)

    dims = {ss.dim for ss in sets.values()}
    if len(dims) != 1:
        raise ValidationError(f"backend returned inconsistent dimensions: {sorted(dims)}")

    return {
        sid: combine(estimate(sets[(sid, "model")]), estimate(sets[(sid, "data")]))
        for sid in ids
    }


def embeddings_by_text(
    sentences: Sequence[str], embedded: Mapping[str, CombinedEmbedding]
) -> dict[str, CombinedEmbedding]:
    """Re-key position-id embeddings by sentence text (duplicates collapse)."""
    return {sentences[int(sid)]: ce for sid, ce in embedded.items()}


def sampling_sweep(
    sentences: Sequence[str],
    ds: EvalDataset,
    n_grid: Sequence[int],
    cfg: PipelineConfig,
    jobs: int = 1,
) -> list[AnalysisRecord]:
    """Evaluation metric as a function of the sampling number n (applied to
    both modes), all else fixed. Duplicate grid entries produce duplicate
    records."""
    if not n_grid:
        raise ValidationError("n_grid must be non-empty")
    records = []
    for n in n_grid:
        run_cfg = replace(cfg, n_model=n, n_data=n)
        embedded = embed_corpus(sentences, run_cfg, jobs=jobs)
        result = eval_scored_pairs(ds, embeddings_by_text(sentences, embedded), cfg.distance)
        records.append(
            AnalysisRecord(metric="spearman", value=result.spearman, context={"n": int(n)})
        )
    return records
