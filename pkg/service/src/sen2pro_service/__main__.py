"""Process entry point: load the model (or exit nonzero), then serve."""

from __future__ import annotations

import argparse
import os
import sys

import uvicorn

from .app import create_app
from .model import DEFAULT_MODEL, ModelRunner, ServiceConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sen2pro-service",
        description="encoder service speaking the /embed wire protocol",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model id or local checkpoint path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("PORT", "8000")))
    parser.add_argument("--max-batch", type=int, default=32)
    parser.add_argument("--no-mc-dropout", action="store_true",
                        help="serve mc_dropout requests deterministically")
    args = parser.parse_args(argv)

    config = ServiceConfig(
        model_id=args.model,
        device=args.device,
        max_batch=args.max_batch,
        mc_dropout_enabled=not args.no_mc_dropout,
    )
    try:
        runner = ModelRunner(config)
    except Exception as exc:  # noqa: BLE001 - any load failure is fatal here
        print(f"failed to load model {config.model_id!r}: {exc}", file=sys.stderr)
        return 1

    uvicorn.run(create_app(runner), host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
