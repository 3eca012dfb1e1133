"""HTTP query service over an immutable engine snapshot.

A snapshot bundles the trained checkpoint, the per-modality embedding
stores, the candidate dataset (for geometry lookups), and the road network
with its region grid. The service never mutates the snapshot; identical
requests return identical bodies. Reload means loading a new snapshot and
starting a new app.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .dataio import DatasetRecord, read_dataset, read_network
from .encoders import OmniTrajModel
from .errors import (
    ConfigError,
    OmniTrajError,
    ParameterError,
    UnsupportedSubsetError,
    VocabularyError,
)
from .retrieval import EmbeddingStore, QuerySpec, condition_query
from .types import GridSpec, RoadNetwork

STORE_MODALITIES = ("traj", "top", "road", "region")


@dataclass(frozen=True)
class EngineSnapshot:
    model: OmniTrajModel
    checkpoint_fingerprint: bytes
    stores: dict[str, EmbeddingStore]
    records: dict[int, DatasetRecord]
    network: RoadNetwork
    grid: GridSpec

    def __post_init__(self):
        for name, store in self.stores.items():
            if store.fingerprint != self.checkpoint_fingerprint:
                raise ConfigError(f"store {name!r} was built from a different checkpoint")
        missing = set(self.stores["traj"].ids.tolist()) - set(self.records)
        if missing:
            raise ConfigError(f"{len(missing)} store ids have no dataset record")


def load_snapshot(artifacts_dir: str | Path) -> EngineSnapshot:
    """Load model.otwt, store_<modality>.otes, dataset.jsonl and network.jsonl."""
    root = Path(artifacts_dir)
    model, fingerprint = OmniTrajModel.load(root / "model.otwt")
    stores = {}
    for mod in STORE_MODALITIES:
        path = root / f"store_{mod}.otes"
        if path.exists():
            stores[mod] = EmbeddingStore.load(path)
    if "traj" not in stores:
        raise ConfigError("snapshot needs at least the trajectory store")
    records = {r.id: r for r in read_dataset(root / "dataset.jsonl")}
    network, grid = read_network(root / "network.jsonl")
    return EngineSnapshot(model, fingerprint, stores, records, network, grid)


class TwoStageBody(BaseModel):
    coarse: str
    subset: int = Field(ge=1)


class ModalitiesBody(BaseModel):
    topology: list[list[float]] | None = None
    road: list[int] | None = None
    region: list[int] | None = None


class QueryBody(BaseModel):
    modalities: ModalitiesBody
    k: int = Field(default=10, ge=1)
    two_stage: TwoStageBody | None = None


def _record_view(rec: DatasetRecord) -> dict:
    return {
        "id": rec.id,
        "points": [[float(x), float(y)] for x, y in rec.trajectory.points],
        "road": list(rec.road.segment_ids) if rec.road else None,
        "region": list(rec.region.region_ids) if rec.region else None,
        "topology": (
            [[float(x), float(y)] for x, y in rec.topology.points] if rec.topology else None
        ),
    }


def create_app(snapshot: EngineSnapshot) -> FastAPI:
    app = FastAPI(title="omnitraj query service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"error": "malformed_body", "detail": exc.errors()}
        )

    @app.exception_handler(OmniTrajError)
    async def engine_error(request: Request, exc: OmniTrajError):
        if isinstance(exc, UnsupportedSubsetError):
            return JSONResponse(
                status_code=422,
                content={
                    "error": exc.code,
                    "message": str(exc),
                    "supported_subsets": exc.supported,
                },
            )
        status = 400 if isinstance(exc, (ParameterError, VocabularyError)) else 500
        return JSONResponse(status_code=status, content={"error": exc.code, "message": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/stats")
    def stats():
        return {
            "candidates": len(snapshot.stores["traj"]),
            "embedding_width": snapshot.stores["traj"].width,
            "modalities": sorted(snapshot.stores),
            "supported_subsets": snapshot.model.supported_subsets(),
            "checkpoint_fingerprint": snapshot.checkpoint_fingerprint.hex(),
            "store_fingerprints": {
                name: s.fingerprint.hex() for name, s in snapshot.stores.items()
            },
            "road_vocab": snapshot.model.cfg.road_vocab,
            "grid_cells": snapshot.grid.num_cells,
        }

    @app.get("/grid")
    def grid():
        g = snapshot.grid
        return {
            "min_x": g.min_x,
            "min_y": g.min_y,
            "max_x": g.max_x,
            "max_y": g.max_y,
            "rows": g.rows,
            "cols": g.cols,
        }

    @app.get("/network")
    def network():
        net = snapshot.network
        min_x, min_y, max_x, max_y = net.bbox
        return {
            "nodes": [[float(x), float(y)] for x, y in net.nodes],
            "segments": [[int(a), int(b)] for a, b in net.segments],
            "bbox": [min_x, min_y, max_x, max_y],
        }

    @app.get("/trajectories/{trajectory_id}")
    def trajectory(trajectory_id: int):
        rec = snapshot.records.get(trajectory_id)
        if rec is None:
            return JSONResponse(status_code=404, content={"error": "unknown_id"})
        return _record_view(rec)

    @app.post("/query")
    def query(body: QueryBody):
        mods = body.modalities
        spec = QuerySpec(
            k=body.k,
            topology=np.asarray(mods.topology, dtype=np.float64) if mods.topology else None,
            road=tuple(mods.road) if mods.road else None,
            region=tuple(mods.region) if mods.region else None,
            coarse_modality=body.two_stage.coarse if body.two_stage else None,
            coarse_subset=body.two_stage.subset if body.two_stage else None,
        )
        result = condition_query(snapshot.stores, spec, snapshot.model)
        return {
            "results": [{"id": i, "score": round(s, 6)} for i, s in result.items],
            "provenance": result.provenance,
        }

    return app


def serve(artifacts_dir: str | Path, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    app = create_app(load_snapshot(artifacts_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")
