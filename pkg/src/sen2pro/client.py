"""HTTP client for a remote encoder service speaking the /embed protocol.

The remote service plays the same role as the toy encoder: given sentences, a
sampling mode, n, and a seed, it returns n vectors per sentence. Everything
downstream of SampleSet construction is backend-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .core import ProtocolError, SampleSet, ServiceError, TransportError, ValidationError

__all__ = ["EmbedRequest", "fetch_samples", "health_check"]

REQUEST_MODES = ("plain", "mc_dropout", "augment")
_MODE_TO_SAMPLE_MODE = {"plain": "plain", "mc_dropout": "model", "augment": "data"}
_POOLINGS = ("first_last_avg", "cls")

DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class EmbedRequest:
    sentences: tuple[str, ...]
    mode: str
    n: int
    seed: int
    pooling: str = "first_last_avg"

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise ValidationError("request needs at least one sentence")
        if self.mode not in REQUEST_MODES:
            raise ValidationError(f"mode must be one of {REQUEST_MODES}")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.mode == "plain" and self.n != 1:
            raise ValidationError("plain mode implies n=1")
        if self.pooling not in _POOLINGS:
            raise ValidationError(f"pooling must be one of {_POOLINGS}")

    def payload(self) -> dict:
        return {
            "sentences": list(self.sentences),
            "mode": self.mode,
            "n": self.n,
            "seed": self.seed,
            "pooling": self.pooling,
        }


def _post_once(url: str, payload: dict, timeout: float) -> requests.Response:
    try:
        return requests.post(url, json=payload, timeout=timeout)
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise TransportError(f"POST {url} failed: {exc}") from exc


def _post(url: str, payload: dict, timeout: float) -> requests.Response:
    # exactly one retry on transport failure, no backoff policy beyond that
    try:
        return _post_once(url, payload, timeout)
    except TransportError:
        return _post_once(url, payload, timeout)


def _body_excerpt(response: requests.Response, limit: int = 200) -> str:
    return response.text[:limit]


def fetch_samples(
    req: EmbedRequest,
    endpoint: str,
    timeout: float = DEFAULT_TIMEOUT,
    sentence_ids: Sequence[str] | None = None,
) -> list[SampleSet]:
    """POST one /embed request and validate the response shapes.

    Returns one SampleSet per request sentence, in request order; sentence_ids
    default to the position within the request.
    """
    if sentence_ids is not None and len(sentence_ids) != len(req.sentences):
        raise ValidationError("sentence_ids must align with request sentences")
    url = endpoint.rstrip("/") + "/embed"
    response = _post(url, req.payload(), timeout)
    if response.status_code != 200:
        raise ServiceError(
            f"{url} returned {response.status_code}: {_body_excerpt(response)}"
        )
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolError(f"{url}: response is not JSON") from exc
    if not isinstance(body, dict) or "dim" not in body or "embeddings" not in body:
        raise ProtocolError(f"{url}: response missing dim/embeddings")
    dim = body["dim"]
    embeddings = body["embeddings"]
    if not isinstance(dim, int) or dim < 1:
        raise ProtocolError(f"{url}: bad dim {dim!r}")
    if not isinstance(embeddings, list) or len(embeddings) != len(req.sentences):
        raise ProtocolError(
            f"{url}: expected {len(req.sentences)} sentence entries, "
            f"got {len(embeddings) if isinstance(embeddings, list) else type(embeddings).__name__}"
        )

    out = []
    for i, per_sentence in enumerate(embeddings):
        if not isinstance(per_sentence, list) or len(per_sentence) != req.n:
            raise ProtocolError(f"{url}: sentence {i}: expected {req.n} vectors")
        try:
            samples = np.array(per_sentence, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"{url}: sentence {i}: non-numeric vectors") from exc
        if samples.ndim != 2 or samples.shape[1] != dim:
            raise ProtocolError(
                f"{url}: sentence {i}: vectors do not match dim={dim}"
            )
        if not np.isfinite(samples).all():
            raise ProtocolError(f"{url}: sentence {i}: non-finite values")
        out.append(
            SampleSet(
                sentence_id=sentence_ids[i] if sentence_ids is not None else str(i),
                mode=_MODE_TO_SAMPLE_MODE[req.mode],
                samples=samples,
            )
        )
    return out


def health_check(endpoint: str, timeout: float = 10.0) -> dict:
    """GET /health; returns {"model": str, "dim": int}."""
    url = endpoint.rstrip("/") + "/health"
    try:
        response = requests.get(url, timeout=timeout)
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise TransportError(f"GET {url} failed: {exc}") from exc
    if response.status_code != 200:
        raise ServiceError(f"{url} returned {response.status_code}: {_body_excerpt(response)}")
    content_type = response.headers.get("content-type", "")
    if "json" not in content_type.lower():
        raise ProtocolError(f"{url}: unexpected content type {content_type!r}")
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolError(f"{url}: response is not JSON") from exc
    if not isinstance(body, dict) or not isinstance(body.get("dim"), int) or body["dim"] < 1:
        raise ProtocolError(f"{url}: health payload missing a positive integer dim")
    if not isinstance(body.get("model"), str):
        raise ProtocolError(f"{url}: health payload missing model name")
    return {"model": body["model"], "dim": body["dim"]}
