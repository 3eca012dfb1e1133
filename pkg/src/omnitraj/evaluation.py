"""Ranking metrics and the two evaluation protocols.

Similarity retrieval is self-retrieval: the query is one modality view of a
held-out trajectory and the single relevant answer is that trajectory's own
id in the trajectory-embedding store. Condition-based retrieval scores how
much of a road/region condition is covered by the element sets of the top-k
retrieved trajectories (union semantics); a per-result-averaged variant is
reported alongside, since the two diverge for k > 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import DatasetRecord
from .encoders import OmniTrajModel, canonical_modality, canonical_subset, subset_name
from .errors import DataError, ParameterError
from .measures import dtw, edr, frechet, hausdorff
from .nn import no_grad
from .preprocess import normalize, normalize_points, resample
from .retrieval import EmbeddingStore, _topk_rows, batch_scores, ranks_of

DEFAULT_EDR_EPS = 0.25  # normalized units


def mean_rank(ranks) -> float:
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ParameterError("no ranks")
    if ranks.min() < 1:
        raise ParameterError("ranks are 1-based")
    return float(ranks.mean())


def mrr(ranks) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ParameterError("no ranks")
    if ranks.min() < 1:
        raise ParameterError("ranks are 1-based")
    return float((1.0 / ranks).mean())


def hit_rate(ranks, k: int) -> float:
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ParameterError("no ranks")
    if k < 1:
        raise ParameterError("k must be >= 1")
    return float((ranks <= k).mean())


def coverage_rate(query_elements, retrieved_element_sets) -> float:
    """|Q intersect R_k| / |Q| with R_k the union of the retrieved sets."""
    q = set(query_elements)
    if not q:
        raise ParameterError("empty query element set")
    union: set = set()
    for elems in retrieved_element_sets:
        union |= set(elems)
    return len(q & union) / len(q)


@dataclass(frozen=True)
class RankingReport:
    variant: str
    ranks: tuple[int, ...]
    mr: float
    mrr: float
    hr: dict[int, float]
    config: dict = field(default_factory=dict)

    @property
    def num_queries(self) -> int:
        return len(self.ranks)

    @classmethod
    def from_ranks(cls, variant: str, ranks, ks=(1, 5, 10), config: dict | None = None):
        ranks = tuple(int(r) for r in ranks)
        return cls(
            variant=variant,
            ranks=ranks,
            mr=mean_rank(ranks),
            mrr=mrr(ranks),
            hr={k: hit_rate(ranks, k) for k in ks},
            config=config or {},
        )

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "num_queries": self.num_queries,
            "MR": self.mr,
            "MRR": self.mrr,
            **{f"HR@{k}": v for k, v in sorted(self.hr.items())},
            "config": self.config,
        }


@dataclass(frozen=True)
class CoverageReport:
    modality: str
    cr: dict[int, float]
    cr_averaged: dict[int, float]
    num_queries: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "modality": self.modality,
            "num_queries": self.num_queries,
            **{f"CR@{k}": v for k, v in sorted(self.cr.items())},
            **{f"CR@{k}_averaged": v for k, v in sorted(self.cr_averaged.items())},
            "config": self.config,
        }


def _query_matrix(model: OmniTrajModel, records: list[DatasetRecord], variant: str) -> np.ndarray:
    """Batch-encode one modality subset for every record."""
    subset = canonical_subset(variant.split("+"))
    with no_grad():
        embs = {}
        for mod in subset:
            if mod == "traj":
                payload = np.stack([model.traj.prepare(r.trajectory) for r in records])
                embs[mod] = model.traj(payload)
            elif mod == "top":
                if any(r.topology is None for r in records):
                    raise DataError("missing topology view")
                embs[mod] = model.top([np.asarray(r.topology.points) for r in records])
            elif mod == "road":
                if any(r.road is None for r in records):
                    raise DataError("missing road view")
                embs[mod] = model.road([list(r.road.segment_ids) for r in records])
            else:
                if any(r.region is None for r in records):
                    raise DataError("missing region view")
                embs[mod] = model.region([list(r.region.region_ids) for r in records])
        if len(subset) == 1:
            out = embs[subset[0]].detach()
        else:
            out = model.fuse(embs).detach()
    return out.astype(np.float32)


def run_similarity_eval(
    model: OmniTrajModel,
    store: EmbeddingStore,
    test_records: list[DatasetRecord],
    variant: str = "top",
    ks=(1, 5, 10),
) -> RankingReport:
    """Self-retrieval ranking of `variant` queries against the trajectory store."""
    if store.modality != "traj":
        raise ParameterError("similarity eval ranks against the trajectory store")
    queries = _query_matrix(model, test_records, variant)
    own_ids = np.asarray([r.id for r in test_records], dtype=np.int64)
    missing = set(own_ids.tolist()) - set(store.ids.tolist())
    if missing:
        raise DataError(f"{len(missing)} test ids missing from the store")
    ranks = ranks_of(store, queries, own_ids)
    name = subset_name(canonical_subset(variant.split("+")))
    return RankingReport.from_ranks(name, ranks, ks=ks, config={"candidates": len(store)})


def _condition_elements(rec: DatasetRecord, modality: str) -> tuple[int, ...]:
    if modality == "road":
        if rec.road is None:
            raise DataError(f"record {rec.id} has no road view")
        return rec.road.segment_ids
    if rec.region is None:
        raise DataError(f"record {rec.id} has no region view")
    return rec.region.region_ids


def run_condition_eval(
    model: OmniTrajModel,
    store: EmbeddingStore,
    test_records: list[DatasetRecord],
    modality: str,
    ks=(1, 5),
    condition_fraction: float = 1.0,
) -> CoverageReport:
    """Coverage of road/region conditions by the retrieved trajectories.

    Each test record's id list (head-truncated to `condition_fraction`)
    becomes the condition; retrieval runs against the trajectory store and
    coverage is measured against the candidate records' element sets.
    """
    modality = canonical_modality(modality)
    if modality not in ("road", "region"):
        raise ParameterError("conditions are road or region id lists")
    if not 0.0 < condition_fraction <= 1.0:
        raise ParameterError("condition fraction must be in (0, 1]")
    by_id = {r.id: r for r in test_records}
    missing = set(store.ids.tolist()) - set(by_id)
    if missing:
        raise DataError("store contains candidates without records")

    conditions = []
    for rec in test_records:
        elems = _condition_elements(rec, modality)
        keep = max(1, int(round(condition_fraction * len(elems))))
        conditions.append(elems[:keep])
    with no_grad():
        if modality == "road":
            queries = model.road([list(c) for c in conditions]).detach()
        else:
            queries = model.region([list(c) for c in conditions]).detach()
    scores = batch_scores(store, queries.astype(np.float32))

    kmax = max(ks)
    union_hits = {k: [] for k in ks}
    averaged = {k: [] for k in ks}
    for qi, rec in enumerate(test_records):
        rows = _topk_rows(scores[qi], store.ids, min(kmax, len(store)))
        retrieved = [by_id[int(store.ids[r])] for r in rows]
        q_elems = set(conditions[qi])
        per_result = [
            len(q_elems & set(_condition_elements(r, modality))) / len(q_elems)
            for r in retrieved
        ]
        for k in ks:
            union_hits[k].append(
                coverage_rate(q_elems, [_condition_elements(r, modality) for r in retrieved[:k]])
            )
            averaged[k].append(float(np.mean(per_result[:k])))
    return CoverageReport(
        modality=modality,
        cr={k: float(np.mean(v)) for k, v in union_hits.items()},
        cr_averaged={k: float(np.mean(v)) for k, v in averaged.items()},
        num_queries=len(test_records),
        config={"candidates": len(store), "condition_fraction": condition_fraction},
    )


def condition_sweep(
    model: OmniTrajModel,
    store: EmbeddingStore,
    test_records: list[DatasetRecord],
    modality: str,
    fractions=(0.25, 0.5, 0.75, 1.0),
    ks=(1, 5),
) -> list[dict]:
    """Coverage grid over condition length and retrieval breadth."""
    grid = []
    for frac in fractions:
        report = run_condition_eval(
            model, store, test_records, modality, ks=ks, condition_fraction=frac
        )
        grid.append(report.to_dict())
    return grid


_MEASURES = {
    "dtw": lambda a, b, eps: dtw(a, b),
    "edr": lambda a, b, eps: float(edr(a, b, eps)),
    "hausdorff": lambda a, b, eps: hausdorff(a, b),
    "frechet": lambda a, b, eps: frechet(a, b),
}


def bench_heuristics(
    records: list[DatasetRecord],
    num_queries: int,
    resample_len: int = 64,
    eps: float = DEFAULT_EDR_EPS,
    measures=("dtw", "edr", "hausdorff", "frechet"),
    ks=(1, 5, 10),
) -> dict[str, RankingReport]:
    """Self-retrieval ranking for the classical measures.

    Queries are topology-keypoint sequences; candidates are the normalized,
    fixed-length trajectories. Distances rank ascending, ties broken by
    ascending id. Deterministic: the first `num_queries` records are used.
    """
    if not records:
        raise ParameterError("no records")
    candidates = [resample(normalize(r.trajectory), resample_len).points for r in records]
    cand_ids = np.asarray([r.id for r in records], dtype=np.int64)
    query_records = records[: min(num_queries, len(records))]

    reports = {}
    for name in measures:
        if name not in _MEASURES:
            raise ParameterError(f"unknown measure {name!r}")
        fn = _MEASURES[name]
        ranks = []
        for rec in query_records:
            if rec.topology is None:
                raise DataError(f"record {rec.id} has no topology view")
            q = normalize_points(rec.topology.points)
            d = np.asarray([fn(q, c, eps) for c in candidates])
            own_pos = int(np.flatnonzero(cand_ids == rec.id)[0])
            own = d[own_pos]
            better = int(np.sum(d < own))
            tied_before = int(np.sum((d == own) & (cand_ids < rec.id)))
            ranks.append(1 + better + tied_before)
        reports[name] = RankingReport.from_ranks(
            name, ranks, ks=ks, config={"eps": eps, "candidates": len(records)}
        )
    return reports
