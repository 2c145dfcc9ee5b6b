"""Core data types and their JSONL/TSV persistence.

A sentence representation moves through three shapes: a raw sample set (many
embedding vectors for one sentence under one uncertainty mode), a per-mode
Gaussian estimate (mean vector plus diagonal covariance), and the combined
task-facing embedding. Evaluation datasets and theory-experiment reports
complete the shared vocabulary.

All types are immutable after construction (arrays are stored read-only) and
validate their invariants eagerly, so no partially-valid value escapes a
constructor. Floats are serialized via ``repr`` (shortest decimal that
round-trips), so save/load is lossless.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "Sen2ProError",
    "ValidationError",
    "ParseError",
    "DegenerateInputError",
    "TransportError",
    "ServiceError",
    "ProtocolError",
    "SampleSet",
    "ProbEmbedding",
    "CombinedEmbedding",
    "EvalDataset",
    "ScoredPair",
    "RankPool",
    "AnalogyQuad",
    "LabeledSentence",
    "TheoryReport",
    "save_sample_set",
    "save_sample_sets",
    "load_sample_set",
    "load_sample_sets",
    "save_prob_embeddings",
    "load_prob_embeddings",
    "save_combined_embeddings",
    "load_combined_embeddings",
    "load_eval_dataset",
    "save_eval_dataset",
]

SAMPLE_MODES = ("model", "data", "plain")
ESTIMATE_MODES = ("model", "data")
DATASET_KINDS = ("scored_pairs", "rank_pools", "analogy_quads", "labeled_sentences")
EXPERIMENT_KINDS = ("theorem1", "theorem2", "estimator_tradeoff", "unified_vs_individual")


class Sen2ProError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(Sen2ProError, ValueError):
    """A type invariant or argument precondition was violated."""


class ParseError(Sen2ProError):
    """An input stream is malformed (bad JSON/TSV, missing fields)."""


class DegenerateInputError(ValidationError):
    """Input is degenerate for the requested statistic (e.g. zero variance)."""


class TransportError(Sen2ProError):
    """A remote endpoint could not be reached or timed out."""


class ServiceError(Sen2ProError):
    """A remote endpoint answered with a non-success status."""


class ProtocolError(Sen2ProError):
    """A remote endpoint answered with a malformed or inconsistent payload."""


# ---------------------------------------------------------------------------
# array helpers


def _readonly_array(value, ndim: int, what: str, context: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{context}: {what} is ragged or non-numeric") from exc
    if arr.ndim != ndim:
        raise ValidationError(
            f"{context}: {what} must be {ndim}-dimensional, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ValidationError(f"{context}: {what} contains non-finite values")
    arr.setflags(write=False)
    return arr


def _vectors_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.array_equal(a, b))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class SampleSet:
    """N embedding vectors for one sentence under one uncertainty mode.

    ``mode`` is "model" for stochastic-encoder samples, "data" for samples of
    augmented surface forms, and "plain" for a single deterministic encode.
    """

    sentence_id: str
    mode: str
    samples: np.ndarray  # shape (n_samples, dim)

    def __post_init__(self) -> None:
        ctx = f"sample set {self.sentence_id!r}"
        if self.mode not in SAMPLE_MODES:
            raise ValidationError(f"{ctx}: unknown mode {self.mode!r}")
        arr = _readonly_array(self.samples, 2, "samples", ctx)
        if arr.shape[0] < 1:
            raise ValidationError(f"{ctx}: needs at least one sample")
        if arr.shape[1] < 1:
            raise ValidationError(f"{ctx}: vectors must be non-empty")
        if self.mode == "plain" and arr.shape[0] != 1:
            raise ValidationError(f"{ctx}: plain mode implies exactly one sample")
        object.__setattr__(self, "samples", arr)

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.sentence_id == other.sentence_id
            and self.mode == other.mode
            and _vectors_equal(self.samples, other.samples)
        )


@dataclass(frozen=True, eq=False)
class ProbEmbedding:
    """Gaussian estimate for one sentence under one uncertainty mode."""

    sentence_id: str
    mode: str
    mu: np.ndarray
    sigma_diag: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        ctx = f"embedding {self.sentence_id!r}"
        if self.mode not in ESTIMATE_MODES:
            raise ValidationError(f"{ctx}: mode must be one of {ESTIMATE_MODES}")
        mu = _readonly_array(self.mu, 1, "mu", ctx)
        sigma = _readonly_array(self.sigma_diag, 1, "sigma_diag", ctx)
        if mu.shape != sigma.shape:
            raise ValidationError(
                f"{ctx}: mu has length {mu.shape[0]} but sigma_diag {sigma.shape[0]}"
            )
        if mu.shape[0] < 1:
            raise ValidationError(f"{ctx}: dimension must be positive")
        if (sigma < 0).any():
            raise ValidationError(f"{ctx}: sigma_diag entries must be >= 0")
        if self.n_samples < 1:
            raise ValidationError(f"{ctx}: n_samples must be >= 1")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sigma)

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbEmbedding):
            return NotImplemented
        return (
            self.sentence_id == other.sentence_id
            and self.mode == other.mode
            and self.n_samples == other.n_samples
            and _vectors_equal(self.mu, other.mu)
            and _vectors_equal(self.sigma_diag, other.sigma_diag)
        )


@dataclass(frozen=True, eq=False)
class CombinedEmbedding:
    """Mode-averaged mean and diagonal covariance; the unit of distance
    computation and feature export."""

    sentence_id: str
    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self) -> None:
        ctx = f"combined embedding {self.sentence_id!r}"
        mu = _readonly_array(self.mu, 1, "mu", ctx)
        sigma = _readonly_array(self.sigma_diag, 1, "sigma_diag", ctx)
        if mu.shape != sigma.shape:
            raise ValidationError(
                f"{ctx}: mu has length {mu.shape[0]} but sigma_diag {sigma.shape[0]}"
            )
        if mu.shape[0] < 1:
            raise ValidationError(f"{ctx}: dimension must be positive")
        if (sigma < 0).any():
            raise ValidationError(f"{ctx}: sigma_diag entries must be >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sigma)

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, CombinedEmbedding):
            return NotImplemented
        return (
            self.sentence_id == other.sentence_id
            and _vectors_equal(self.mu, other.mu)
            and _vectors_equal(self.sigma_diag, other.sigma_diag)
        )


class ScoredPair(NamedTuple):
    sent_a: str
    sent_b: str
    gold: float


class RankPool(NamedTuple):
    query: str
    positive: str
    pool: tuple[str, ...]


class AnalogyQuad(NamedTuple):
    a: str
    b: str
    c: str
    d: str


class LabeledSentence(NamedTuple):
    sentence: str
    label: str


_RECORD_TYPES = {
    "scored_pairs": ScoredPair,
    "rank_pools": RankPool,
    "analogy_quads": AnalogyQuad,
    "labeled_sentences": LabeledSentence,
}


@dataclass(frozen=True)
class EvalDataset:
    """Scored pairs, ranked pools, analogy quadruples, or labeled sentences."""

    kind: str
    records: tuple

    def __post_init__(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise ValidationError(f"unknown dataset kind {self.kind!r}")
        records = tuple(self.records)
        expected = _RECORD_TYPES[self.kind]
        for i, rec in enumerate(records):
            if not isinstance(rec, expected):
                raise ValidationError(
                    f"record {i}: expected {expected.__name__}, got {type(rec).__name__}"
                )
            if self.kind == "scored_pairs" and not math.isfinite(rec.gold):
                raise ValidationError(f"record {i}: gold score must be finite")
            if self.kind == "rank_pools":
                if rec.pool.count(rec.positive) != 1:
                    raise ValidationError(
                        f"record {i}: pool must contain the positive exactly once"
                    )
            if self.kind == "analogy_quads" and not all(rec):
                raise ValidationError(f"record {i}: quadruple has an empty slot")
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class TheoryReport:
    """Outcome of one numeric theory experiment."""

    experiment: str
    parameters: Mapping
    measurements: tuple  # of (label, float)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENT_KINDS:
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        ms = tuple((str(label), float(value)) for label, value in self.measurements)
        if not ms:
            raise ValidationError("report needs at least one measurement")
        object.__setattr__(self, "measurements", ms)
        object.__setattr__(self, "parameters", dict(self.parameters))

    def value(self, label: str) -> float:
        for key, val in self.measurements:
            if key == label:
                return val
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "measurements": [[k, v] for k, v in self.measurements],
        }


# ---------------------------------------------------------------------------
# persistence

PathOrIO = Union[str, Path, IO[str]]


@contextmanager
def _open_stream(target: PathOrIO, mode: str) -> Iterator[IO[str]]:
    if isinstance(target, (str, Path)):
        with open(target, mode, encoding="utf-8") as fh:
            yield fh
    else:
        yield target


def _dump_line(obj: dict, sink: IO[str]) -> None:
    sink.write(json.dumps(obj, sort_keys=True))
    sink.write("\n")


def _iter_json_lines(source: IO[str]) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ParseError(f"line {lineno}: expected a JSON object")
        yield lineno, obj


def _require(obj: dict, field: str, lineno: int):
    if field not in obj:
        raise ParseError(f"line {lineno}: missing field {field!r}")
    return obj[field]


def save_sample_set(sample_set: SampleSet, sink: PathOrIO) -> None:
    """Write one sample set as a single JSONL line."""
    with _open_stream(sink, "w") as fh:
        _dump_line(_sample_set_dict(sample_set), fh)


def save_sample_sets(sample_sets: Iterable[SampleSet], sink: PathOrIO) -> None:
    with _open_stream(sink, "w") as fh:
        for ss in sample_sets:
            _dump_line(_sample_set_dict(ss), fh)


def _sample_set_dict(ss: SampleSet) -> dict:
    return {
        "sentence_id": ss.sentence_id,
        "mode": ss.mode,
        "dim": ss.dim,
        "samples": ss.samples.tolist(),
    }


def _sample_set_from_dict(obj: dict, lineno: int) -> SampleSet:
    sid = _require(obj, "sentence_id", lineno)
    mode = _require(obj, "mode", lineno)
    samples = _require(obj, "samples", lineno)
    ss = SampleSet(sentence_id=str(sid), mode=mode, samples=samples)
    if "dim" in obj and int(obj["dim"]) != ss.dim:
        raise ValidationError(
            f"sample set {ss.sentence_id!r}: declared dim {obj['dim']} "
            f"does not match vectors of length {ss.dim}"
        )
    return ss


def load_sample_sets(source: PathOrIO) -> list[SampleSet]:
    with _open_stream(source, "r") as fh:
        out = [_sample_set_from_dict(obj, n) for n, obj in _iter_json_lines(fh)]
    if not out:
        raise ParseError("no records")
    return out


def load_sample_set(source: PathOrIO) -> SampleSet:
    """Load a stream holding exactly one sample set."""
    records = load_sample_sets(source)
    if len(records) != 1:
        raise ParseError(f"expected exactly one record, found {len(records)}")
    return records[0]


def save_prob_embeddings(embeddings: Iterable[ProbEmbedding], sink: PathOrIO) -> None:
    with _open_stream(sink, "w") as fh:
        for pe in embeddings:
            _dump_line(
                {
                    "sentence_id": pe.sentence_id,
                    "mode": pe.mode,
                    "mu": pe.mu.tolist(),
                    "sigma_diag": pe.sigma_diag.tolist(),
                    "n_samples": pe.n_samples,
                },
                fh,
            )


def load_prob_embeddings(source: PathOrIO) -> list[ProbEmbedding]:
    out = []
    with _open_stream(source, "r") as fh:
        for lineno, obj in _iter_json_lines(fh):
            out.append(
                ProbEmbedding(
                    sentence_id=str(_require(obj, "sentence_id", lineno)),
                    mode=_require(obj, "mode", lineno),
                    mu=_require(obj, "mu", lineno),
                    sigma_diag=_require(obj, "sigma_diag", lineno),
                    n_samples=int(_require(obj, "n_samples", lineno)),
                )
            )
    if not out:
        raise ParseError("no records")
    return out


def save_combined_embeddings(
    embeddings: Iterable[CombinedEmbedding],
    sink: PathOrIO,
    sentences: Mapping[str, str] | None = None,
) -> None:
    """Write combined embeddings; optionally record each sentence's text so
    downstream evaluation can key embeddings by surface form."""
    with _open_stream(sink, "w") as fh:
        for ce in embeddings:
            obj = {
                "sentence_id": ce.sentence_id,
                "mu": ce.mu.tolist(),
                "sigma_diag": ce.sigma_diag.tolist(),
            }
            if sentences is not None and ce.sentence_id in sentences:
                obj["sentence"] = sentences[ce.sentence_id]
            _dump_line(obj, fh)


def load_combined_embeddings(source: PathOrIO) -> tuple[list[CombinedEmbedding], dict[str, str]]:
    """Returns the embeddings plus a {sentence_id: sentence text} map for
    records that carried their text."""
    out: list[CombinedEmbedding] = []
    texts: dict[str, str] = {}
    with _open_stream(source, "r") as fh:
        for lineno, obj in _iter_json_lines(fh):
            ce = CombinedEmbedding(
                sentence_id=str(_require(obj, "sentence_id", lineno)),
                mu=_require(obj, "mu", lineno),
                sigma_diag=_require(obj, "sigma_diag", lineno),
            )
            out.append(ce)
            if "sentence" in obj:
                texts[ce.sentence_id] = str(obj["sentence"])
    if not out:
        raise ParseError("no records")
    return out, texts


def _split_tsv(line: str, n_fields: int, lineno: int) -> list[str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != n_fields:
        raise ParseError(
            f"line {lineno}: expected {n_fields} tab-separated fields, got {len(parts)}"
        )
    return parts


def load_eval_dataset(source: PathOrIO, kind: str) -> EvalDataset:
    """Load a dataset of the given kind.

    scored_pairs / analogy_quads / labeled_sentences are TSV; rank_pools is
    JSONL with fields query, positive, pool.
    """
    if kind not in DATASET_KINDS:
        raise ValidationError(f"unknown dataset kind {kind!r}")
    records: list = []
    with _open_stream(source, "r") as fh:
        if kind == "rank_pools":
            for lineno, obj in _iter_json_lines(fh):
                pool = _require(obj, "pool", lineno)
                if not isinstance(pool, list):
                    raise ParseError(f"line {lineno}: pool must be a list")
                records.append(
                    RankPool(
                        query=str(_require(obj, "query", lineno)),
                        positive=str(_require(obj, "positive", lineno)),
                        pool=tuple(str(s) for s in pool),
                    )
                )
        else:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                if kind == "scored_pairs":
                    a, b, score = _split_tsv(raw, 3, lineno)
                    try:
                        gold = float(score)
                    except ValueError as exc:
                        raise ParseError(f"line {lineno}: bad gold score {score!r}") from exc
                    records.append(ScoredPair(a, b, gold))
                elif kind == "analogy_quads":
                    records.append(AnalogyQuad(*_split_tsv(raw, 4, lineno)))
                else:
                    sentence, label = _split_tsv(raw, 2, lineno)
                    records.append(LabeledSentence(sentence, label))
    if not records:
        raise ParseError("no records")
    return EvalDataset(kind=kind, records=tuple(records))


def save_eval_dataset(dataset: EvalDataset, sink: PathOrIO) -> None:
    with _open_stream(sink, "w") as fh:
        if dataset.kind == "rank_pools":
            for rec in dataset.records:
                _dump_line(
                    {"query": rec.query, "positive": rec.positive, "pool": list(rec.pool)},
                    fh,
                )
        elif dataset.kind == "scored_pairs":
            for rec in dataset.records:
                fh.write(f"{rec.sent_a}\t{rec.sent_b}\t{rec.gold!r}\n")
        elif dataset.kind == "analogy_quads":
            for rec in dataset.records:
                fh.write("\t".join(rec) + "\n")
        else:
            for rec in dataset.records:
                fh.write(f"{rec.sentence}\t{rec.label}\n")
