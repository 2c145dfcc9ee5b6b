"""Encoder service: MC-dropout and word-augmentation sampling over a
BERT-class model, behind the /embed wire protocol."""

from .app import EmbedRequest, create_app
from .model import DEFAULT_MODEL, ModelRunner, ServiceConfig

__all__ = [
    "DEFAULT_MODEL",
    "EmbedRequest",
    "ModelRunner",
    "ServiceConfig",
    "create_app",
]
