"""Omni-semantic trajectory retrieval engine."""

from .types import GridSpec, RegionSeq, RoadNetwork, RoadSeq, TopologySeq, Trajectory
from .preprocess import normalize, normalize_points, resample
from .extract import extract_regions, extract_topology
from .synth import generate_network, generate_trajectories, grid_for_network, replay_road_seq
from .dataio import DatasetRecord, ensure_views, read_dataset, read_network, write_dataset, write_network
from .measures import dtw, edr, frechet, hausdorff
from .encoders import EncoderConfig, ModalityEmbedding, OmniTrajModel, patchify
from .training import AugmentationPolicy, TrainConfig, augment_region, augment_road, bidirectional_loss, info_nce, train
from .retrieval import EmbeddingStore, QuerySpec, RetrievalResult, build_store, condition_query, topk, two_stage
from .evaluation import (
    CoverageReport,
    RankingReport,
    bench_heuristics,
    coverage_rate,
    hit_rate,
    mean_rank,
    mrr,
    run_condition_eval,
    run_similarity_eval,
)

__version__ = "0.1.0"
