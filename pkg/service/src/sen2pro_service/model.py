"""Model loading and pooled encoding over a BERT-class checkpoint.

Two pooling strategies:
  first_last_avg  token-mean of (first hidden layer + last hidden layer)/2
                  over non-special tokens
  cls             final-layer vector at the [CLS] position

`stochastic=True` keeps dropout layers active during the forward pass (the
MC-dropout sampling route); the global torch RNG is seeded per call, which
makes repeat requests reproducible on one process but is best-effort by
contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

__all__ = ["DEFAULT_MODEL", "ServiceConfig", "ModelRunner"]

DEFAULT_MODEL = "prajjwal1/bert-tiny"


@dataclass(frozen=True)
class ServiceConfig:
    model_id: str = DEFAULT_MODEL
    device: str = "cpu"
    max_batch: int = 32
    mc_dropout_enabled: bool = True

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


class ModelRunner:
    """Owns the tokenizer and model; all forwards run under no_grad."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModel.from_pretrained(config.model_id).to(config.device)
        self.model.eval()
        self.dim = int(self.model.config.hidden_size)
        self.name = config.model_id

    def _forward_chunk(self, sentences: list[str], pooling: str) -> np.ndarray:
        batch = self.tokenizer(
            sentences,
            padding=True,
            truncation=True,
            return_tensors="pt",
            return_special_tokens_mask=True,
        )
        special = batch.pop("special_tokens_mask")
        batch = {k: v.to(self.config.device) for k, v in batch.items()}
        out = self.model(**batch, output_hidden_states=True)
        hidden = out.hidden_states  # (embeddings, layer1, ..., layerN)

        if pooling == "cls":
            pooled = hidden[-1][:, 0]
        else:
            avg = (hidden[1] + hidden[-1]) / 2.0
            mask = batch["attention_mask"] * (1 - special.to(self.config.device))
            counts = mask.sum(dim=1, keepdim=True)
            # a sentence with no content tokens ([CLS][SEP] only) falls back
            # to averaging whatever positions attention covers
            fallback = counts.squeeze(1) == 0
            if bool(fallback.any()):
                mask[fallback] = batch["attention_mask"][fallback]
                counts = mask.sum(dim=1, keepdim=True)
            pooled = (avg * mask.unsqueeze(-1)).sum(dim=1) / counts
        return pooled.detach().cpu().numpy().astype(np.float64)

    def encode(
        self,
        sentences: list[str],
        pooling: str,
        stochastic: bool = False,
        seed: int | None = None,
    ) -> np.ndarray:
        """(len(sentences), dim) pooled vectors; deterministic unless
        stochastic, in which case dropout stays active."""
        if stochastic:
            self.model.train()
            if seed is not None:
                torch.manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        try:
            chunks = [
                sentences[i : i + self.config.max_batch]
                for i in range(0, len(sentences), self.config.max_batch)
            ]
            with torch.no_grad():
                rows = [self._forward_chunk(chunk, pooling) for chunk in chunks]
        finally:
            self.model.eval()
        return np.concatenate(rows, axis=0)
