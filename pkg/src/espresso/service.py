"""HTTP front end over the retrieval library.

All state is loaded once at startup and never mutated, so requests can be
served concurrently without locking. Errors map to a fixed
{code, message, details} envelope with stable machine-readable codes.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import Catalog, load_catalog
from .errors import AllOovError, IntegrityError, UnknownPieceError
from .numerics import ProjectionModel, load_model
from .retrieval import RetrievalIndex, build_index, query_piece
from .text_encoder import WordEmbeddingTable, load_embedding_table

_log = logging.getLogger(__name__)

DEFAULT_PORT = 8080


@dataclass(frozen=True)
class ServiceState:
    """Everything a request handler needs, immutable after startup."""

    catalog: Catalog
    index: RetrievalIndex
    model: ProjectionModel
    table: WordEmbeddingTable
    version: str
    started_at: float

    def __post_init__(self):
        if self.index.model_fingerprint != self.model.config_fingerprint:
            raise IntegrityError("index/model fingerprint mismatch")


def build_state(
    catalog_path: str | Path,
    model_path: str | Path,
    embeddings_path: str | Path,
    version: str,
) -> ServiceState:
    """Load the catalog, model, and embeddings, and build the index."""
    catalog = load_catalog(catalog_path)
    model = load_model(model_path)
    table = load_embedding_table(embeddings_path)
    index = build_index(catalog, model)
    return ServiceState(
        catalog=catalog,
        index=index,
        model=model,
        table=table,
        version=version,
        started_at=time.time(),
    )


class QueryRequest(BaseModel):
    piece_id: str
    text: str


def _envelope(status: int, code: str, message: str, details: dict | None = None):
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details or {}},
    )


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="espresso", version=state.version)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(UnknownPieceError)
    async def _unknown_piece(request, exc: UnknownPieceError):
        return _envelope(404, "unknown_piece", str(exc), {"piece_id": exc.piece_id})

    @app.exception_handler(AllOovError)
    async def _unencodable(request, exc: AllOovError):
        return _envelope(
            400, "unencodable_query", str(exc), {"oov_tokens": exc.oov_tokens}
        )

    @app.exception_handler(RequestValidationError)
    async def _malformed(request, exc: RequestValidationError):
        return _envelope(422, "malformed_body", "request body is invalid",
                         {"errors": [str(e) for e in exc.errors()]})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": state.version,
            "model_fingerprint": state.model.config_fingerprint,
        }

    @app.get("/pieces")
    def pieces():
        return {
            "pieces": [
                {
                    "piece_id": p.piece_id,
                    "title": p.title,
                    "performance_count": len(p.performance_ids),
                }
                for p in state.catalog.pieces
            ]
        }

    @app.get("/pieces/{piece_id}/performances")
    def performances(piece_id: str):
        piece = state.catalog.piece(piece_id)
        return {
            "piece_id": piece.piece_id,
            "title": piece.title,
            "performances": [
                {
                    "performance_id": perf.performance_id,
                    "artist_label": perf.artist_label,
                }
                for perf in state.catalog.performances_of(piece.piece_id)
            ],
        }

    @app.post("/query")
    def query(body: QueryRequest):
        return query_piece(
            state.catalog,
            state.index,
            state.model,
            state.table,
            body.piece_id,
            body.text,
        )

    return app


def run_service(
    catalog_path: str | Path,
    model_path: str | Path,
    embeddings_path: str | Path,
    port: int = DEFAULT_PORT,
    version: str = "0",
) -> None:
    """Blocking entry point used by the command line."""
    import uvicorn

    state = build_state(catalog_path, model_path, embeddings_path, version)
    app = create_app(state)
    _log.info("serving on port %d", port)
    uvicorn.run(app, host="0.0.0.0", port=port)
