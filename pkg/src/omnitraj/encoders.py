"""The four modality encoders and their shared-space projection heads.

Each encoder maps one view of a trajectory to a unit-norm vector of width
`h` in the common latent space:

  * trajectory: fixed-length resampled points, cut into non-overlapping
    patches, with a CLS token and learned absolute position embeddings;
  * topology:   variable-length keypoints, CLS token, rotary positions;
  * road:       segment-id lookup, begin-of-sequence pooling token, rotary
    positions;
  * region:     cell-id lookup, CLS token, and no positional signal at all,
    which makes the embedding exactly permutation-invariant.

Overlong sequences are head-truncated (earliest tokens kept). Fused
queries concatenate per-modality vectors in the canonical order
(traj, top, road, region) and pass through a single linear projector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParameterError, ShapeError, UnsupportedSubsetError, VocabularyError
from .nn import (
    Embedding,
    LayerNorm,
    Linear,
    Module,
    Parameter,
    Tensor,
    TransformerBlock,
    concat,
    gelu,
    l2_normalize,
)
from .preprocess import normalize, normalize_points, resample
from .types import Trajectory

MODALITY_ORDER = ("traj", "top", "road", "region")

_ALIASES = {
    "traj": "traj",
    "trajectory": "traj",
    "top": "top",
    "topology": "top",
    "road": "road",
    "reg": "region",
    "region": "region",
}


def canonical_modality(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ParameterError(f"unknown modality {name!r}") from None


def canonical_subset(names) -> tuple[str, ...]:
    """Sort a modality collection into canonical concatenation order."""
    mods = {canonical_modality(n) for n in names}
    if len(mods) != len(list(names)):
        raise ParameterError("duplicate modality in subset")
    return tuple(m for m in MODALITY_ORDER if m in mods)


def subset_name(subset: tuple[str, ...]) -> str:
    return "+".join(subset)


@dataclass(frozen=True)
class EncoderConfig:
    """Shared hyperparameters for all encoders.

    Desk-scale defaults; the reference configuration at full scale is
    d=256, h=512, blocks=6, heads=8, resample_len=200.
    """

    d: int = 32
    h: int = 64
    blocks: int = 2
    heads: int = 4
    patch_size: int = 8
    resample_len: int = 64
    max_top_len: int = 128
    max_road_len: int = 128
    max_region_len: int = 64
    road_vocab: int = 0
    region_vocab: int = 256
    rope_base: float = 10000.0
    pooling: tuple[str, str, str, str] = ("cls", "cls", "bos", "cls")
    fusion_subsets: tuple[str, ...] = ("top+road", "top+region", "top+road+region")

    def __post_init__(self):
        if self.patch_size > self.resample_len or self.resample_len // self.patch_size < 1:
            raise ParameterError("resample length must fit at least one patch")
        if self.d % self.heads != 0:
            raise ParameterError("d must be divisible by the head count")
        if self.road_vocab < 1 or self.region_vocab < 1:
            raise ParameterError("road and region vocabularies must be non-empty")
        for mode in self.pooling:
            if mode not in ("cls", "bos", "mean"):
                raise ParameterError(f"unknown pooling mode {mode!r}")
        object.__setattr__(
            self, "fusion_subsets",
            tuple(subset_name(canonical_subset(s.split("+"))) for s in self.fusion_subsets),
        )

    @property
    def num_patches(self) -> int:
        return self.resample_len // self.patch_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pooling"] = list(self.pooling)
        d["fusion_subsets"] = list(self.fusion_subsets)
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "EncoderConfig":
        obj = dict(obj)
        if "pooling" in obj:
            obj["pooling"] = tuple(obj["pooling"])
        if "fusion_subsets" in obj:
            obj["fusion_subsets"] = tuple(obj["fusion_subsets"])
        return cls(**obj)


@dataclass(frozen=True)
class ModalityEmbedding:
    trajectory_id: int
    modality: str
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if vec.ndim != 1 or (norm > 0 and abs(norm - 1.0) > 1e-6):
            raise ParameterError("embedding must be a unit-norm vector")
        vec = vec.copy()
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


def patchify(points: np.ndarray, patch_size: int) -> np.ndarray:
    """Cut an (L, 2) point array into floor(L/P) flattened windows of 2P
    coordinates; trailing remainder points are dropped."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError("expected an (L, 2) point array")
    n = len(pts)
    if patch_size < 1 or patch_size > n:
        raise ParameterError("patch size must be in [1, L]")
    n_p = n // patch_size
    return pts[: n_p * patch_size].reshape(n_p, 2 * patch_size)


class ProjectionHead(Module):
    """Two-layer head into the shared space, followed by L2 normalization."""

    def __init__(self, d: int, h: int, rng: np.random.Generator, activation: str = "gelu"):
        self.fc1 = Linear(d, h, rng)
        self.fc2 = Linear(h, h, rng)
        self.activation = activation

    def forward(self, z: Tensor) -> Tensor:
        hidden = self.fc1(z)
        if self.activation == "gelu":
            hidden = gelu(hidden)
        return l2_normalize(self.fc2(hidden))


def _prepend_token(token: Parameter, x: Tensor) -> Tensor:
    """[B, S, d] -> [B, S+1, d] with the learned token broadcast at slot 0."""
    batch, _, dim = x.shape
    slot = Tensor(np.zeros((batch, 1, dim))) + token.reshape(1, 1, dim)
    return concat([slot, x], axis=1)


def _pool(x: Tensor, mask: np.ndarray | None, mode: str) -> Tensor:
    if mode in ("cls", "bos"):
        return x[:, 0, :]
    if mode == "mean":
        if mask is None:
            return x.mean(axis=1)
        weights = mask.astype(np.float64)
        weights = weights / weights.sum(axis=1, keepdims=True)
        return (x * Tensor(weights[:, :, None])).sum(axis=1)
    raise ParameterError(f"unknown pooling mode {mode!r}")


def _pad_batch(seqs: list[np.ndarray], width: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to the batch max length; returns (padded, mask with CLS slot)."""
    batch = len(seqs)
    max_len = max(len(s) for s in seqs)
    if width:
        data = np.zeros((batch, max_len, width))
    else:
        data = np.zeros((batch, max_len), dtype=np.int64)
    mask = np.zeros((batch, max_len + 1), dtype=bool)
    mask[:, 0] = True
    for i, s in enumerate(seqs):
        data[i, : len(s)] = s
        mask[i, 1 : len(s) + 1] = True
    return data, mask


class TrajectoryEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        n_p = cfg.num_patches
        self.patch_proj = Linear(2 * cfg.patch_size, cfg.d, rng)
        self.cls = Parameter(rng.normal(0.0, 0.02, size=(1, cfg.d)))
        self.pos = Parameter(rng.normal(0.0, 0.02, size=(n_p + 1, cfg.d)))
        self.blocks = [TransformerBlock(cfg.d, cfg.heads, rng) for _ in range(cfg.blocks)]
        self.ln_out = LayerNorm(cfg.d)
        self.head = ProjectionHead(cfg.d, cfg.h, rng)

    def forward(self, points: np.ndarray) -> Tensor:
        """[B, L, 2] normalized resampled points -> [B, h] unit rows."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise ParameterError("expected a [B, L, 2] batch")
        if pts.shape[1] != self.cfg.resample_len:
            raise ParameterError(
                f"trajectory encoder needs inputs resampled to {self.cfg.resample_len} points"
            )
        n_p = self.cfg.num_patches
        patches = pts[:, : n_p * self.cfg.patch_size].reshape(
            len(pts), n_p, 2 * self.cfg.patch_size
        )
        x = self.patch_proj(Tensor(patches))
        x = _prepend_token(self.cls, x) + self.pos
        for block in self.blocks:
            x = block(x)
        pooled = _pool(self.ln_out(x), None, self.cfg.pooling[0])
        return self.head(pooled)

    def prepare(self, t: Trajectory) -> np.ndarray:
        """Normalize + resample a raw trajectory for this encoder."""
        return resample(normalize(t), self.cfg.resample_len).points


class TopologyEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.point_proj = Linear(2, cfg.d, rng)
        self.cls = Parameter(rng.normal(0.0, 0.02, size=(1, cfg.d)))
        self.blocks = [
            TransformerBlock(cfg.d, cfg.heads, rng, rope=True, rope_base=cfg.rope_base)
            for _ in range(cfg.blocks)
        ]
        self.ln_out = LayerNorm(cfg.d)
        self.head = ProjectionHead(cfg.d, cfg.h, rng)

    def forward(self, point_seqs: list[np.ndarray]) -> Tensor:
        """List of (k, 2) keypoint arrays (any frame) -> [B, h] unit rows."""
        prepared = []
        for pts in point_seqs:
            pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
            if len(pts) == 0:
                raise ParameterError("empty topology sequence")
            prepared.append(normalize_points(pts[: self.cfg.max_top_len]))
        data, mask = _pad_batch(prepared, width=2)
        x = _prepend_token(self.cls, self.point_proj(Tensor(data)))
        for block in self.blocks:
            x = block(x, mask=mask)
        pooled = _pool(self.ln_out(x), mask, self.cfg.pooling[1])
        return self.head(pooled)


class RoadEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.embed = Embedding(cfg.road_vocab, cfg.d, rng)
        self.bos = Parameter(rng.normal(0.0, 0.02, size=(1, cfg.d)))
        self.blocks = [
            TransformerBlock(cfg.d, cfg.heads, rng, rope=True, rope_base=cfg.rope_base)
            for _ in range(cfg.blocks)
        ]
        self.ln_out = LayerNorm(cfg.d)
        self.head = ProjectionHead(cfg.d, cfg.h, rng)

    def forward(self, id_seqs: list) -> Tensor:
        prepared = []
        for ids in id_seqs:
            arr = np.asarray(list(ids), dtype=np.int64)
            if arr.size == 0:
                raise ParameterError("empty road sequence")
            if arr.min() < 0 or arr.max() >= self.cfg.road_vocab:
                raise VocabularyError(
                    f"road id outside vocabulary of size {self.cfg.road_vocab}"
                )
            prepared.append(arr[: self.cfg.max_road_len])
        data, mask = _pad_batch(prepared, width=0)
        x = _prepend_token(self.bos, self.embed(data))
        for block in self.blocks:
            x = block(x, mask=mask)
        pooled = _pool(self.ln_out(x), mask, self.cfg.pooling[2])
        return self.head(pooled)


class RegionEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.embed = Embedding(cfg.region_vocab, cfg.d, rng)
        self.cls = Parameter(rng.normal(0.0, 0.02, size=(1, cfg.d)))
        self.blocks = [TransformerBlock(cfg.d, cfg.heads, rng) for _ in range(cfg.blocks)]
        self.ln_out = LayerNorm(cfg.d)
        self.head = ProjectionHead(cfg.d, cfg.h, rng)

    def forward(self, id_seqs: list) -> Tensor:
        prepared = []
        for ids in id_seqs:
            seen: dict[int, None] = {}
            for i in ids:
                seen.setdefault(int(i), None)
            arr = np.asarray(list(seen), dtype=np.int64)
            if arr.size == 0:
                raise ParameterError("empty region sequence")
            if arr.min() < 0 or arr.max() >= self.cfg.region_vocab:
                raise VocabularyError(
                    f"region id outside vocabulary of size {self.cfg.region_vocab}"
                )
            prepared.append(arr[: self.cfg.max_region_len])
        data, mask = _pad_batch(prepared, width=0)
        x = _prepend_token(self.cls, self.embed(data))
        # no positional signal: attention sees the regions as a set
        for block in self.blocks:
            x = block(x, mask=mask)
        pooled = _pool(self.ln_out(x), mask, self.cfg.pooling[3])
        return self.head(pooled)


class FusionProjector(Module):
    def __init__(self, subset: tuple[str, ...], h: int, rng: np.random.Generator):
        self.subset = subset
        self.proj = Linear(len(subset) * h, h, rng)

    def forward(self, embeddings: dict[str, Tensor]) -> Tensor:
        parts = [embeddings[m] for m in self.subset]
        return l2_normalize(self.proj(concat(parts, axis=-1)))


class OmniTrajModel(Module):
    """Bundle of the four encoders plus the fusion projectors."""

    def __init__(self, cfg: EncoderConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.traj = TrajectoryEncoder(cfg, rng)
        self.top = TopologyEncoder(cfg, rng)
        self.road = RoadEncoder(cfg, rng)
        self.region = RegionEncoder(cfg, rng)
        self.fusion = {
            name: FusionProjector(tuple(name.split("+")), cfg.h, rng)
            for name in cfg.fusion_subsets
        }

    def encoder(self, modality: str) -> Module:
        return getattr(self, canonical_modality(modality))

    def encode_batch(self, modality: str, payloads) -> Tensor:
        return self.encoder(modality)(payloads)

    def fuse(self, embeddings: dict[str, Tensor]) -> Tensor:
        """Fuse >= 2 modality embeddings through the matching projector."""
        subset = canonical_subset(embeddings.keys())
        if len(subset) < 2:
            raise ParameterError("fusion needs at least two modalities")
        name = subset_name(subset)
        if name not in self.fusion:
            raise UnsupportedSubsetError(name, sorted(self.fusion))
        widths = {e.shape[-1] for e in embeddings.values()}
        if widths != {self.cfg.h}:
            raise ParameterError("fused embeddings must all have the shared width")
        return self.fusion[name]({canonical_modality(k): v for k, v in embeddings.items()})

    def supported_subsets(self) -> list[str]:
        return sorted(self.fusion)

    # -- single-item conveniences -------------------------------------------

    def encode_trajectory(self, t: Trajectory, prepared: bool = False) -> ModalityEmbedding:
        pts = t.points if prepared else self.traj.prepare(t)
        if len(pts) != self.cfg.resample_len:
            raise ParameterError("trajectory must be resampled to the configured length")
        vec = self.traj(pts[None]).detach()[0]
        return ModalityEmbedding(t.id, "traj", vec)

    def encode_topology(self, seq) -> ModalityEmbedding:
        vec = self.top([np.asarray(seq.points)]).detach()[0]
        return ModalityEmbedding(seq.trajectory_id, "top", vec)

    def encode_road(self, seq) -> ModalityEmbedding:
        vec = self.road([list(seq.segment_ids)]).detach()[0]
        return ModalityEmbedding(seq.trajectory_id, "road", vec)

    def encode_region(self, seq) -> ModalityEmbedding:
        vec = self.region([list(seq.region_ids)]).detach()[0]
        return ModalityEmbedding(seq.trajectory_id, "region", vec)

    # -- persistence ----------------------------------------------------------

    def weight_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters().items() if name != "cfg"}

    def save(self, path) -> bytes:
        from .nn import save_checkpoint

        return save_checkpoint(path, self.weight_arrays(), self.cfg.to_dict())

    def fingerprint(self) -> bytes:
        from .nn import weights_fingerprint

        return weights_fingerprint(self.weight_arrays(), self.cfg.to_dict())

    @classmethod
    def load(cls, path) -> tuple["OmniTrajModel", bytes]:
        from .nn import load_checkpoint

        arrays, config, fp = load_checkpoint(path)
        model = cls(EncoderConfig.from_dict(config))
        params = model.named_parameters()
        if set(params) != set(arrays):
            raise ShapeError("checkpoint does not match the model architecture")
        for name, p in params.items():
            if p.data.shape != arrays[name].shape:
                raise ShapeError(f"shape mismatch for {name}")
            p.data = arrays[name]
        return model, fp
