import numpy as np
import pytest

import omnitraj as ot
from omnitraj import coverage_rate, hit_rate, mean_rank, mrr
from omnitraj.dataio import DatasetRecord, ensure_views
from omnitraj.errors import ParameterError
from omnitraj.evaluation import (
    RankingReport,
    bench_heuristics,
    run_condition_eval,
    run_similarity_eval,
    _query_matrix,
)
from omnitraj.retrieval import EmbeddingStore, build_store


def toy_setup(count=30, seed=3):
    net = ot.generate_network(6, 4, 4, 0.2)
    grid = ot.grid_for_network(net)
    pairs = ot.generate_trajectories(net, count, seed=seed, min_hops=5, max_hops=9)
    records = [ensure_views(DatasetRecord(t, road=r), grid) for t, r in pairs]
    cfg = ot.EncoderConfig(
        d=8, h=16, blocks=1, heads=2, patch_size=4, resample_len=16,
        road_vocab=net.num_segments, region_vocab=grid.num_cells,
    )
    model = ot.OmniTrajModel(cfg, seed=seed)
    return model, records


# ---------------------------------------------------------------- metrics

def test_mean_rank_examples():
    assert mean_rank([1, 1, 1]) == 1.0
    assert mean_rank([1, 2, 3]) == 2.0
    with pytest.raises(ParameterError):
        mean_rank([])


def test_mrr_examples():
    assert mrr([1, 1]) == 1.0
    assert mrr([1, 2, 4]) == pytest.approx((1 + 0.5 + 0.25) / 3)


def test_hit_rate_examples():
    assert hit_rate([1, 3, 12], 10) == pytest.approx(2 / 3)
    assert hit_rate([4, 9, 2], 9) == 1.0
    with pytest.raises(ParameterError):
        hit_rate([1], 0)


def test_coverage_rate_examples():
    assert coverage_rate({"a", "b"}, [{"a", "c"}]) == 0.5
    assert coverage_rate({"a", "b"}, [{"a"}, {"b", "z"}]) == 1.0
    with pytest.raises(ParameterError):
        coverage_rate(set(), [{"a"}])


def test_metrics_match_independent_recomputation():
    rng = np.random.default_rng(0)
    ranks = rng.integers(1, 40, size=25)
    assert mean_rank(ranks) == pytest.approx(sum(ranks) / len(ranks), abs=1e-12)
    assert mrr(ranks) == pytest.approx(sum(1.0 / r for r in ranks) / len(ranks), abs=1e-12)
    for k in (1, 5, 10):
        assert hit_rate(ranks, k) == pytest.approx(
            sum(1 for r in ranks if r <= k) / len(ranks), abs=1e-12
        )


def test_metric_relations():
    rng = np.random.default_rng(1)
    for _ in range(20):
        ranks = rng.integers(1, 30, size=15)
        hrs = [hit_rate(ranks, k) for k in (1, 2, 5, 10, 30)]
        assert hrs == sorted(hrs)  # HR@k non-decreasing in k
        assert mrr(ranks) >= hit_rate(ranks, 1) - 1e-12
        assert (mean_rank(ranks) == 1.0) == (hit_rate(ranks, 1) == 1.0)


def test_ranking_report_invariants():
    rep = RankingReport.from_ranks("top", [1, 2, 7, 30])
    assert rep.mr >= 1.0
    assert 0 < rep.mrr <= 1.0
    d = rep.to_dict()
    assert set(d) >= {"MR", "MRR", "HR@1", "HR@5", "HR@10", "variant", "num_queries"}


# ---------------------------------------------------------------- similarity eval

def test_similarity_eval_perfect_double():
    model, records = toy_setup()
    queries = _query_matrix(model, records, "top")
    ids = np.asarray([r.id for r in records])
    # identity test double: the store rows ARE the query embeddings
    store = EmbeddingStore("traj", ids, queries, model.fingerprint())
    report = run_similarity_eval(model, store, records, "top")
    assert report.mr == 1.0
    assert report.mrr == 1.0
    assert report.hr[1] == 1.0


def test_similarity_eval_variants_run():
    model, records = toy_setup()
    store = build_store(model, records, "traj")
    for variant in ("top", "reg", "road", "reg+top", "road+top", "reg+road+top"):
        rep = run_similarity_eval(model, store, records, variant)
        assert rep.num_queries == len(records)
        assert rep.hr[1] <= rep.hr[5] <= rep.hr[10]


def test_similarity_eval_rejects_wrong_store():
    model, records = toy_setup()
    store = build_store(model, records, "road")
    with pytest.raises(ParameterError):
        run_similarity_eval(model, store, records, "top")


# ---------------------------------------------------------------- condition eval

def test_condition_eval_perfect_double():
    model, records = toy_setup()
    queries = _query_matrix(model, records, "road")
    ids = np.asarray([r.id for r in records])
    store = EmbeddingStore("traj", ids, queries, model.fingerprint())
    report = run_condition_eval(model, store, records, "road")
    assert report.cr[1] == 1.0  # top-1 is the source trajectory, full containment
    assert report.cr[5] == 1.0


def test_condition_eval_union_dominates_per_query():
    model, records = toy_setup()
    store = build_store(model, records, "traj")
    report = run_condition_eval(model, store, records, "region", ks=(1, 5))
    assert report.cr[5] >= report.cr[1] - 1e-12  # union semantics
    assert 0.0 <= report.cr_averaged[5] <= 1.0


def test_condition_eval_fraction_sweep():
    from omnitraj.evaluation import condition_sweep

    model, records = toy_setup(count=12)
    store = build_store(model, records, "traj")
    grid = condition_sweep(model, store, records, "road", fractions=(0.5, 1.0), ks=(1, 5))
    assert len(grid) == 2
    assert grid[0]["config"]["condition_fraction"] == 0.5


# ---------------------------------------------------------------- heuristics bench

def test_bench_heuristics_deterministic_and_sane():
    _, records = toy_setup(count=12)
    a = bench_heuristics(records, num_queries=6, resample_len=16)
    b = bench_heuristics(records, num_queries=6, resample_len=16)
    for name in ("dtw", "edr", "hausdorff", "frechet"):
        assert a[name].ranks == b[name].ranks
        assert a[name].mr == b[name].mr
        assert a[name].num_queries == 6
    # self-retrieval with tiny candidate sets: topology of a trajectory is
    # far closer to its own shape than to other walks
    assert a["dtw"].hr[5] >= 0.5
