"""Service test fixtures: a tiny randomly-initialized BERT checkpoint built
on disk (no hub access) and a live uvicorn instance on an ephemeral port."""

from __future__ import annotations

import os
import threading
import time

import pytest
import torch
import uvicorn
from transformers import BertConfig, BertModel, BertTokenizerFast

from sen2pro_service import ModelRunner, ServiceConfig, create_app

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
_WORDS = [
    "the", "tide", "turned", "at", "noon", "maps", "fold", "along", "old",
    "creases", "a", "kettle", "ticks", "as", "it", "cools", "long", "shadows",
    "cross", "empty", "platform", "rain", "beads", "on", "railing", "archive",
    "smells", "of", "dust", "and", "tape", "fog", "lifts", "off", "harbor",
    "by", "ten", "ferry", "wakes", "slap", "pilings", "gulls", "ride",
    "thermal", "line", "diver", "checks", "her", "gauge", "ropes", "salt",
    "stiff", "crane", "swings", "east",
]


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tiny-bert")
    vocab = _SPECIALS + _WORDS
    (path / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(path / "vocab.txt"), do_lower_case=True)
    tokenizer.save_pretrained(str(path))

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(str(path))
    return str(path)


@pytest.fixture(scope="session")
def runner(checkpoint) -> ModelRunner:
    return ModelRunner(ServiceConfig(model_id=checkpoint))


@pytest.fixture(scope="session")
def endpoint(runner):
    config = uvicorn.Config(
        create_app(runner), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start within 30s")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
