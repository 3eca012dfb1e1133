"""Immutable embedding stores with exact cosine top-k retrieval.

A store is a unit-normalized f32 matrix keyed by trajectory id plus the
fingerprint of the checkpoint that produced it. Retrieval is an exact
linear scan (no ANN): scores are dot products of unit vectors, ties broken
by ascending id, so results are fully deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import DatasetRecord
from .encoders import (
    MODALITY_ORDER,
    OmniTrajModel,
    canonical_modality,
    canonical_subset,
)
from .errors import ConfigError, DataError, ParameterError
from .nn import no_grad
from .preprocess import normalize, resample
from .types import Trajectory

_STORE_MAGIC = b"OTES"
_STORE_VERSION = 1
MODALITY_TAGS = {"traj": 0, "top": 1, "road": 2, "region": 3, "fused": 4}
_TAG_NAMES = {v: k for k, v in MODALITY_TAGS.items()}


@dataclass(frozen=True)
class EmbeddingStore:
    modality: str
    ids: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    fingerprint: bytes = b"\x00" * 16

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        matrix = np.asarray(self.matrix, dtype=np.float32)
        if matrix.ndim != 2 or len(ids) != len(matrix):
            raise ParameterError("store needs one id per matrix row")
        if len(np.unique(ids)) != len(ids):
            raise ParameterError("store ids must be unique")
        if self.modality not in MODALITY_TAGS:
            raise ParameterError(f"unknown modality tag {self.modality!r}")
        if len(self.fingerprint) != 16:
            raise ParameterError("fingerprint must be 16 bytes")
        norms = np.linalg.norm(matrix, axis=1)
        if len(matrix) and np.any(np.abs(norms - 1.0) > 1e-4):
            raise ParameterError("store rows must be unit-normalized")
        ids = ids.copy()
        matrix = matrix.copy()
        ids.flags.writeable = False
        matrix.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "matrix", matrix)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def width(self) -> int:
        return self.matrix.shape[1]

    def row_of(self, trajectory_id: int) -> np.ndarray:
        pos = np.flatnonzero(self.ids == trajectory_id)
        if len(pos) == 0:
            raise ParameterError(f"id {trajectory_id} not in store")
        return self.matrix[pos[0]]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(_STORE_MAGIC)
            f.write(struct.pack("<BB", _STORE_VERSION, MODALITY_TAGS[self.modality]))
            f.write(struct.pack("<QI", len(self.ids), self.width))
            f.write(self.fingerprint)
            f.write(self.ids.astype("<i8").tobytes())
            f.write(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingStore":
        blob = Path(path).read_bytes()
        if blob[:4] != _STORE_MAGIC:
            raise ConfigError("not an embedding-store file")
        version, tag = struct.unpack_from("<BB", blob, 4)
        if version != _STORE_VERSION:
            raise ConfigError(f"unsupported store version {version}")
        count, width = struct.unpack_from("<QI", blob, 6)
        fp = blob[18:34]
        ids = np.frombuffer(blob, dtype="<i8", count=count, offset=34)
        matrix = np.frombuffer(
            blob, dtype="<f4", count=count * width, offset=34 + 8 * count
        ).reshape(count, width)
        return cls(_TAG_NAMES[tag], ids, matrix, fp)


@dataclass(frozen=True)
class QuerySpec:
    """One retrieval request: at least one modality payload plus k."""

    k: int
    trajectory: np.ndarray | None = None
    topology: np.ndarray | None = None
    road: tuple[int, ...] | None = None
    region: tuple[int, ...] | None = None
    coarse_modality: str | None = None
    coarse_subset: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if not self.payloads():
            raise ParameterError("query needs at least one modality payload")
        if (self.coarse_modality is None) != (self.coarse_subset is None):
            raise ParameterError("two-stage queries need both coarse modality and subset size")
        if self.coarse_subset is not None and self.coarse_subset < self.k:
            raise ParameterError("coarse subset size must be >= k")

    def payloads(self) -> dict[str, object]:
        out: dict[str, object] = {}
        if self.trajectory is not None:
            out["traj"] = self.trajectory
        if self.topology is not None:
            out["top"] = self.topology
        if self.road is not None:
            out["road"] = self.road
        if self.region is not None:
            out["region"] = self.region
        return out


@dataclass(frozen=True)
class RetrievalResult:
    items: tuple[tuple[int, float], ...]
    provenance: dict

    def ids(self) -> list[int]:
        return [i for i, _ in self.items]

    def scores(self) -> list[float]:
        return [s for _, s in self.items]


def _topk_rows(scores: np.ndarray, ids: np.ndarray, k: int) -> np.ndarray:
    """Row indices of the exact top k by (score desc, id asc)."""
    n = len(scores)
    if k >= n:
        return np.lexsort((ids, -scores.astype(np.float64)))[:k]
    part = np.argpartition(-scores, k - 1)
    threshold = scores[part[k - 1]]
    cand = np.flatnonzero(scores >= threshold)
    order = np.lexsort((ids[cand], -scores[cand].astype(np.float64)))
    return cand[order[:k]]


def topk(store: EmbeddingStore, query: np.ndarray, k: int) -> RetrievalResult:
    """Exact top-k by cosine over the full store (linear scan)."""
    if k < 1 or k > len(store):
        raise ParameterError(f"k must be in [1, {len(store)}]")
    q = np.asarray(query, dtype=np.float32).reshape(-1)
    if q.shape[0] != store.width:
        raise ParameterError(f"query width {q.shape[0]} != store width {store.width}")
    scores = store.matrix @ q
    rows = _topk_rows(scores, store.ids, k)
    items = tuple((int(store.ids[r]), float(scores[r])) for r in rows)
    return RetrievalResult(items, {"stage": "single", "modality": store.modality})


def two_stage(
    store_coarse: EmbeddingStore,
    store_fine: EmbeddingStore,
    q_coarse: np.ndarray,
    q_fine: np.ndarray,
    subset_size: int,
    k: int,
) -> RetrievalResult:
    """Coarse filter to `subset_size` survivors, then exact top-k among them."""
    if subset_size < k:
        raise ParameterError("subset size must be >= k")
    if set(store_coarse.ids.tolist()) != set(store_fine.ids.tolist()):
        raise ConfigError("coarse and fine stores cover different id universes")
    survivors = topk(store_coarse, q_coarse, min(subset_size, len(store_coarse)))
    keep = np.asarray(survivors.ids(), dtype=np.int64)
    positions = {int(i): r for r, i in enumerate(store_fine.ids)}
    rows = np.asarray([positions[int(i)] for i in keep])
    q = np.asarray(q_fine, dtype=np.float32).reshape(-1)
    scores = store_fine.matrix[rows] @ q
    order = _topk_rows(scores, store_fine.ids[rows], min(k, len(rows)))
    items = tuple((int(store_fine.ids[rows[r]]), float(scores[r])) for r in order)
    return RetrievalResult(
        items,
        {
            "stage": "two-stage",
            "coarse_modality": store_coarse.modality,
            "subset_size": int(subset_size),
            "fine_modality": store_fine.modality,
        },
    )


def batch_scores(store: EmbeddingStore, queries: np.ndarray, chunk: int = 256) -> np.ndarray:
    """[Q, |D|] cosine matrix computed in query chunks."""
    q = np.asarray(queries, dtype=np.float32)
    out = np.empty((len(q), len(store)), dtype=np.float32)
    for lo in range(0, len(q), chunk):
        out[lo : lo + chunk] = q[lo : lo + chunk] @ store.matrix.T
    return out


def ranks_of(store: EmbeddingStore, queries: np.ndarray, own_ids: np.ndarray) -> np.ndarray:
    """Rank (1-based) of each query's own id under (score desc, id asc)."""
    scores = batch_scores(store, queries)
    own_rows = np.asarray([np.flatnonzero(store.ids == i)[0] for i in own_ids])
    ranks = np.empty(len(queries), dtype=np.int64)
    for qi in range(len(queries)):
        s = scores[qi]
        own = s[own_rows[qi]]
        own_id = own_ids[qi]
        better = int(np.sum(s > own))
        tied_before = int(np.sum((s == own) & (store.ids < own_id)))
        ranks[qi] = 1 + better + tied_before
    return ranks


def encode_query(model: OmniTrajModel, spec: QuerySpec) -> tuple[np.ndarray, tuple[str, ...]]:
    """Embed a query spec: single payloads go through their encoder, multiple
    payloads through the fusion projector for that subset."""
    payloads = spec.payloads()
    subset = canonical_subset(payloads.keys())
    with no_grad():
        embs = {}
        for mod in subset:
            payload = payloads[mod]
            if mod == "traj":
                pts = np.asarray(payload, dtype=np.float64)
                t = resample(normalize(Trajectory(-1, pts)), model.cfg.resample_len)
                embs[mod] = model.traj(t.points[None])
            elif mod == "top":
                embs[mod] = model.top([np.asarray(payload, dtype=np.float64)])
            elif mod == "road":
                embs[mod] = model.road([list(payload)])
            elif mod == "region":
                embs[mod] = model.region([list(payload)])
        if len(subset) == 1:
            vec = embs[subset[0]].detach()[0]
        else:
            vec = model.fuse(embs).detach()[0]
    return vec.astype(np.float32), subset


def condition_query(
    stores: dict[str, EmbeddingStore], spec: QuerySpec, model: OmniTrajModel
) -> RetrievalResult:
    """Retrieve trajectories matching road/region/topology conditions.

    The condition embedding is scored against the trajectory-modality store;
    when the spec carries coarse-stage settings, that modality's store
    filters the candidate set first.
    """
    if "traj" not in stores:
        raise ConfigError("condition queries need the trajectory-modality store")
    target = stores["traj"]
    if spec.k > len(target):
        raise ParameterError(f"k must be in [1, {len(target)}]")
    q_fine, subset = encode_query(model, spec)
    if spec.coarse_modality is None:
        result = topk(target, q_fine, spec.k)
    else:
        coarse = canonical_modality(spec.coarse_modality)
        if coarse not in stores:
            raise ConfigError(f"no store for coarse modality {coarse!r}")
        if coarse not in spec.payloads():
            raise ParameterError("coarse modality must be one of the query payloads")
        coarse_spec = QuerySpec(k=spec.k, **{_FIELD_OF[coarse]: spec.payloads()[coarse]})
        q_coarse, _ = encode_query(model, coarse_spec)
        result = two_stage(stores[coarse], target, q_coarse, q_fine, spec.coarse_subset, spec.k)
    provenance = dict(result.provenance)
    provenance["query_modalities"] = list(subset)
    return RetrievalResult(result.items, provenance)


_FIELD_OF = {"traj": "trajectory", "top": "topology", "road": "road", "region": "region"}


def build_store(
    model: OmniTrajModel,
    records: list[DatasetRecord],
    modality: str,
    batch_size: int = 128,
) -> EmbeddingStore:
    """Encode every record's view of one modality into a store."""
    mod = canonical_modality(modality)
    if mod not in MODALITY_ORDER:
        raise ParameterError(f"cannot build a store for {modality!r}")
    ids = []
    rows = []
    with no_grad():
        for lo in range(0, len(records), batch_size):
            chunk = records[lo : lo + batch_size]
            if mod == "traj":
                payload = np.stack([model.traj.prepare(r.trajectory) for r in chunk])
                emb = model.traj(payload)
            elif mod == "top":
                views = [r.topology for r in chunk]
                if any(v is None for v in views):
                    raise DataError("a record is missing its topology view")
                emb = model.top([np.asarray(v.points) for v in views])
            elif mod == "road":
                views = [r.road for r in chunk]
                if any(v is None for v in views):
                    raise DataError("a record is missing its road view")
                emb = model.road([list(v.segment_ids) for v in views])
            else:
                views = [r.region for r in chunk]
                if any(v is None for v in views):
                    raise DataError("a record is missing its region view")
                emb = model.region([list(v.region_ids) for v in views])
            rows.append(emb.detach().astype(np.float32))
            ids.extend(r.id for r in chunk)
    matrix = np.concatenate(rows, axis=0) if rows else np.zeros((0, model.cfg.h), np.float32)
    # re-normalize in f32 to absorb the cast
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix = matrix / np.maximum(norms, 1e-12)
    return EmbeddingStore(mod, np.asarray(ids, dtype=np.int64), matrix, model.fingerprint())
