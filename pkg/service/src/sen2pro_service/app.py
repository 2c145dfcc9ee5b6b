"""HTTP surface: GET /health and POST /embed.

Modes: `plain` is one deterministic forward (repeated when n > 1),
`mc_dropout` runs n seeded stochastic forwards with dropout active, `augment`
encodes n single-edit surface variants deterministically. Malformed requests
return 400 with a JSON error body; model failures return 500.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .augment import augment_n, variant_seed
from .model import ModelRunner

__all__ = ["EmbedRequest", "create_app"]


class EmbedRequest(BaseModel):
    sentences: list[str] = Field(min_length=1)
    mode: Literal["plain", "mc_dropout", "augment"]
    n: int = Field(ge=1)
    seed: int
    pooling: Literal["first_last_avg", "cls"] = "first_last_avg"


def _mc_seed(seed: int, sample_index: int) -> int:
    return variant_seed(seed, "\x00mc_dropout", sample_index)


def create_app(runner: ModelRunner) -> FastAPI:
    app = FastAPI(title="sen2pro-service", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(Exception)
    async def _server_error(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"error": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/health")
    async def health():
        return {"model": runner.name, "dim": runner.dim}

    # handlers are async on purpose: CPU-bound forwards then serialize on the
    # event loop, which is the whole concurrency model of this service
    @app.post("/embed")
    async def embed(req: EmbedRequest):
        n_sentences = len(req.sentences)
        stochastic = req.mode == "mc_dropout" and runner.config.mc_dropout_enabled

        if req.mode == "augment":
            variants = [augment_n(s, req.n, req.seed) for s in req.sentences]
            flat = [v for per_sentence in variants for v in per_sentence]
            vecs = runner.encode(flat, req.pooling)
            embeddings = [
                vecs[i * req.n : (i + 1) * req.n].tolist() for i in range(n_sentences)
            ]
        elif stochastic:
            per_sample = [
                runner.encode(
                    list(req.sentences), req.pooling,
                    stochastic=True, seed=_mc_seed(req.seed, j),
                )
                for j in range(req.n)
            ]
            embeddings = [
                [per_sample[j][i].tolist() for j in range(req.n)]
                for i in range(n_sentences)
            ]
        else:  # plain, or mc_dropout with dropout administratively disabled
            vecs = runner.encode(list(req.sentences), req.pooling)
            embeddings = [[vec.tolist()] * req.n for vec in vecs]

        return {"dim": runner.dim, "embeddings": embeddings}

    return app
