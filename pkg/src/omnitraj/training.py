"""Contrastive alignment of the modality encoders.

Every batch pairs each trajectory's embedding with its topology, road and
region views (roads and regions re-augmented each epoch); the symmetric
InfoNCE objective pulls matching pairs together against the other in-batch
trajectories in both directions. Fused views train their projectors through
the same loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import DatasetRecord, ensure_views
from .encoders import EncoderConfig, OmniTrajModel
from .errors import DataError, NumericError, ParameterError, ShapeError, VocabularyError
from .nn import Adam, Tensor, log_softmax
from .types import GridSpec, RegionSeq, RoadSeq


@dataclass(frozen=True)
class AugmentationPolicy:
    """Per-view augmentation rates; the kinds are fixed, the rates are ours.

    `identity_prob` passes the exact view through untouched for that draw:
    augmented views teach invariance (coverage), exact views anchor rank-1
    precision, and conditions are queried with exact lists at eval time.
    """

    reverse_prob: float = 0.3
    keep_lo: float = 0.5
    keep_hi: float = 1.0
    shuffle_prob: float = 0.3
    shuffle_window: int = 3
    replace_prob: float = 0.1
    region_shuffle: bool = True
    region_drop_prob: float = 0.2
    identity_prob: float = 0.0

    def __post_init__(self):
        probs = ("reverse_prob", "shuffle_prob", "replace_prob", "region_drop_prob",
                 "identity_prob")
        for name in probs:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be a probability")
        if not (0.0 < self.keep_lo <= self.keep_hi <= 1.0):
            raise ParameterError("keep fraction range must lie in (0, 1]")
        if self.shuffle_window < 2:
            raise ParameterError("shuffle window must be >= 2")

    @classmethod
    def none(cls) -> "AugmentationPolicy":
        return cls(
            reverse_prob=0.0,
            keep_lo=1.0,
            keep_hi=1.0,
            shuffle_prob=0.0,
            replace_prob=0.0,
            region_shuffle=False,
            region_drop_prob=0.0,
        )


def augment_road(
    seq: RoadSeq, policy: AugmentationPolicy, seed, vocab_size: int
) -> RoadSeq:
    """Reverse / contiguous-truncate / window-shuffle / replace, per policy.

    Deterministic per seed; the result keeps at least one segment and the
    original trajectory id (positive-pairing integrity).
    """
    rng = np.random.default_rng(seed)
    if rng.random() < policy.identity_prob:
        return seq
    ids = list(seq.segment_ids)
    if rng.random() < policy.reverse_prob:
        ids.reverse()
    frac = rng.uniform(policy.keep_lo, policy.keep_hi)
    keep = max(1, round(frac * len(ids)))
    if keep < len(ids):
        start = int(rng.integers(0, len(ids) - keep + 1))
        ids = ids[start : start + keep]
    if len(ids) > 1 and rng.random() < policy.shuffle_prob:
        w = policy.shuffle_window
        for lo in range(0, len(ids), w):
            window = ids[lo : lo + w]
            ids[lo : lo + w] = [window[p] for p in rng.permutation(len(window))]
    if policy.replace_prob > 0:
        for i in range(len(ids)):
            if rng.random() < policy.replace_prob:
                ids[i] = int(rng.integers(0, vocab_size))
    return RoadSeq(seq.trajectory_id, tuple(ids))


def augment_region(seq: RegionSeq, policy: AugmentationPolicy, seed) -> RegionSeq:
    """Shuffle and/or drop region ids; keeps at least one id."""
    rng = np.random.default_rng(seed)
    if rng.random() < policy.identity_prob:
        return seq
    ids = list(seq.region_ids)
    if policy.region_shuffle and len(ids) > 1:
        ids = [ids[p] for p in rng.permutation(len(ids))]
    if policy.region_drop_prob > 0:
        kept = [i for i in ids if rng.random() >= policy.region_drop_prob]
        if not kept:
            kept = [ids[int(rng.integers(0, len(ids)))]]
        ids = kept
    return RegionSeq(seq.trajectory_id, tuple(ids))


def info_nce(queries: Tensor, keys: Tensor, tau: float) -> Tensor:
    """Mean cross-entropy of each query against all in-batch keys, with the
    diagonal as the positive class. Rows are assumed unit-normalized, so the
    dot product is the cosine similarity."""
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    if queries.shape != keys.shape or queries.ndim != 2:
        raise ShapeError("queries and keys must both be [B, h]")
    b = queries.shape[0]
    logits = (queries @ keys.transpose((1, 0))) * (1.0 / tau)
    logp = log_softmax(logits, axis=1)
    picked = logp[np.arange(b), np.arange(b)]
    return -picked.mean()


@dataclass(frozen=True)
class LossReport:
    tau: float
    directional: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.directional.values()))


def bidirectional_loss(
    traj_emb: Tensor, modality_embs: dict[str, Tensor], tau: float
) -> tuple[Tensor, LossReport]:
    """Sum of traj->m and m->traj InfoNCE terms over every provided view."""
    if traj_emb is None or not modality_embs:
        raise ParameterError("need the trajectory embedding and at least one modality")
    total: Tensor | None = None
    directional: dict[str, float] = {}
    for name, emb in modality_embs.items():
        fwd = info_nce(traj_emb, emb, tau)
        rev = info_nce(emb, traj_emb, tau)
        directional[f"traj->{name}"] = fwd.item()
        directional[f"{name}->traj"] = rev.item()
        term = fwd + rev
        total = term if total is None else total + term
    return total, LossReport(tau=tau, directional=directional)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 2e-4
    lr_final_factor: float = 1.0
    tau: float = 0.07
    seed: int = 0
    train_fusions: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 2:
            raise ParameterError("epochs must be >= 0 and batch size >= 2")
        if self.tau <= 0:
            raise ParameterError("temperature must be positive")
        if not 0.0 < self.lr_final_factor <= 1.0:
            raise ParameterError("lr_final_factor must be in (0, 1]")

    def lr_at(self, epoch: int) -> float:
        """Cosine decay from lr to lr * lr_final_factor over the run."""
        if self.lr_final_factor == 1.0 or self.epochs <= 1:
            return self.lr
        low = self.lr * self.lr_final_factor
        frac = epoch / (self.epochs - 1)
        return low + (self.lr - low) * 0.5 * (1.0 + np.cos(np.pi * frac))


@dataclass
class TrainResult:
    model: OmniTrajModel
    curve: list[dict]


def _prepare_inputs(records: list[DatasetRecord], model: OmniTrajModel,
                    grid: GridSpec | None):
    if grid is not None:
        records = [ensure_views(r, grid) for r in records]
    for r in records:
        if r.road is None or r.region is None or r.topology is None:
            raise DataError(f"record {r.id} is missing a modality view")
    vocab = model.cfg.road_vocab
    max_road = max(max(r.road.segment_ids) for r in records)
    if max_road >= vocab:
        raise VocabularyError(f"road id {max_road} exceeds vocabulary {vocab}")
    traj_inputs = np.stack([model.traj.prepare(r.trajectory) for r in records])
    topos = [np.asarray(r.topology.points) for r in records]
    roads = [r.road for r in records]
    regions = [r.region for r in records]
    return records, traj_inputs, topos, roads, regions


def train(
    records: list[DatasetRecord],
    encoder_cfg: EncoderConfig,
    policy: AugmentationPolicy,
    cfg: TrainConfig,
    grid: GridSpec | None = None,
    log=None,
) -> TrainResult:
    """Adam-optimized contrastive training; deterministic per seed.

    On a non-finite loss or gradient the model is rolled back to the end of
    the last completed epoch and NumericError propagates.
    """
    model = OmniTrajModel(encoder_cfg, seed=cfg.seed)
    records, traj_inputs, topos, roads, regions = _prepare_inputs(records, model, grid)
    n = len(records)
    if n < 2:
        raise DataError("training needs at least two trajectories")
    opt = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    curve: list[dict] = []
    snapshot = {name: p.data.copy() for name, p in model.named_parameters().items()}

    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        sums: dict[str, float] = {}
        batches = 0
        try:
            for lo in range(0, n, cfg.batch_size):
                idx = order[lo : lo + cfg.batch_size]
                if len(idx) < 2:
                    continue
                road_views = [augment_road(roads[i], policy, rng, encoder_cfg.road_vocab)
                              for i in idx]
                region_views = [augment_region(regions[i], policy, rng) for i in idx]
                traj_emb = model.traj(traj_inputs[idx])
                views = {
                    "top": model.top([topos[i] for i in idx]),
                    "road": model.road([list(v.segment_ids) for v in road_views]),
                    "region": model.region([list(v.region_ids) for v in region_views]),
                }
                if cfg.train_fusions:
                    for name in model.supported_subsets():
                        views[name] = model.fuse(
                            {m: views[m] for m in name.split("+")}
                        )
                total, report = bidirectional_loss(traj_emb, views, cfg.tau)
                model.zero_grad()
                total.backward()
                opt.step()
                batches += 1
                for key, value in report.directional.items():
                    sums[key] = sums.get(key, 0.0) + value
        except NumericError:
            for name, p in model.named_parameters().items():
                p.data = snapshot[name].copy()
            raise
        entry = {
            "epoch": epoch,
            "total": sum(sums.values()) / max(batches, 1),
            "directions": {k: v / max(batches, 1) for k, v in sums.items()},
        }
        curve.append(entry)
        snapshot = {name: p.data.copy() for name, p in model.named_parameters().items()}
        if log is not None:
            log(entry)
    return TrainResult(model=model, curve=curve)
