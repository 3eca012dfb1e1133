import json

import numpy as np
import pytest

from omnitraj import (
    GridSpec,
    Trajectory,
    extract_regions,
    extract_topology,
    generate_network,
    generate_trajectories,
    grid_for_network,
    normalize,
    replay_road_seq,
    resample,
)
from omnitraj.dataio import DatasetRecord, read_dataset, read_network, record_to_json, write_dataset, write_network
from omnitraj.errors import DegenerateInputError, GenerationError, ParameterError
from omnitraj.synth import NOISE_BOUND
from omnitraj.types import RoadNetwork, RoadSeq, RegionSeq


# ---------------------------------------------------------------- oracles

def natural_spline_oracle(s, y, u):
    """Independent natural cubic spline: tridiagonal solve for the second
    derivatives, then piecewise cubic evaluation."""
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(s)
    h = np.diff(s)
    a = np.zeros((n, n))
    rhs = np.zeros(n)
    a[0, 0] = a[n - 1, n - 1] = 1.0
    for i in range(1, n - 1):
        a[i, i - 1] = h[i - 1] / 6.0
        a[i, i] = (h[i - 1] + h[i]) / 3.0
        a[i, i + 1] = h[i] / 6.0
        rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]
    m = np.linalg.solve(a, rhs)

    out = np.empty_like(np.asarray(u, dtype=np.float64))
    for j, uj in enumerate(np.asarray(u)):
        i = min(np.searchsorted(s, uj, side="right") - 1, n - 2)
        i = max(i, 0)
        t1, t2 = s[i + 1] - uj, uj - s[i]
        hi = h[i]
        out[j] = (
            m[i] * t1**3 / (6 * hi)
            + m[i + 1] * t2**3 / (6 * hi)
            + (y[i] / hi - m[i] * hi / 6) * t1
            + (y[i + 1] / hi - m[i + 1] * hi / 6) * t2
        )
    return out


def recursive_dp_oracle(pts, epsilon):
    """Plain recursive Douglas-Peucker keep-indices."""

    def seg_dist(p, a, b):
        ab = b - a
        denom = ab @ ab
        if denom == 0:
            return np.linalg.norm(p - a)
        t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
        return np.linalg.norm(p - (a + t * ab))

    def rec(lo, hi):
        if hi - lo < 2:
            return []
        dists = [seg_dist(pts[i], pts[lo], pts[hi]) for i in range(lo + 1, hi)]
        imax = int(np.argmax(dists))
        if dists[imax] <= epsilon:
            return []
        split = lo + 1 + imax
        return rec(lo, split) + [split] + rec(split, hi)

    return [0] + rec(0, len(pts) - 1) + [len(pts) - 1]


# ---------------------------------------------------------------- network

def test_lattice_edge_counts():
    net = generate_network(1, 4, 4, 0.0)
    assert len(net.nodes) == 16
    assert net.num_segments == 24  # 4*3 horizontal + 3*4 vertical
    net2 = generate_network(1, 2, 2, 0.0)
    assert len(net2.nodes) == 4
    assert net2.num_segments == 4


def test_network_determinism():
    a = generate_network(7, 8, 8, 0.2)
    b = generate_network(7, 8, 8, 0.2)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.segments, b.segments)


def test_network_parameter_errors():
    with pytest.raises(ParameterError):
        generate_network(0, 1, 4, 0.0)
    with pytest.raises(ParameterError):
        generate_network(0, 4, 4, 0.5)


def test_network_is_connected():
    assert generate_network(3, 5, 6, 0.3).is_connected()


# ---------------------------------------------------------------- trajectories

def test_generate_trajectories_contract():
    net = generate_network(1, 4, 4, 0.1)
    pairs = generate_trajectories(net, 10, seed=3, min_hops=5, max_hops=10)
    assert len(pairs) == 10
    for t, road in pairs:
        assert t.n >= 20
        assert len(road) >= 1
        assert all(0 <= s < net.num_segments for s in road.segment_ids)


def test_generate_trajectories_deterministic():
    net = generate_network(1, 4, 4, 0.1)
    a = generate_trajectories(net, 10, seed=3, min_hops=5, max_hops=10)
    b = generate_trajectories(net, 10, seed=3, min_hops=5, max_hops=10)
    lines_a = [record_to_json(DatasetRecord(t, road=r)) for t, r in a]
    lines_b = [record_to_json(DatasetRecord(t, road=r)) for t, r in b]
    assert lines_a == lines_b


def test_mean_road_sequence_length():
    net = generate_network(5, 8, 8, 0.2)
    pairs = generate_trajectories(net, 2000, seed=5, min_hops=8, max_hops=20)
    mean_len = np.mean([len(r) for _, r in pairs])
    assert 8 <= mean_len <= 20


def test_disconnected_network_rejected():
    # two disjoint 2-node components
    nodes = [(0.0, 0.0), (1.0, 0.0), (5.0, 5.0), (6.0, 5.0)]
    net = RoadNetwork(nodes, [(0, 1), (2, 3)])
    with pytest.raises(GenerationError):
        generate_trajectories(net, 1, seed=0, min_hops=3, max_hops=4)


def test_replay_reconstructs_within_noise_bound():
    net = generate_network(11, 6, 6, 0.2)
    pairs = generate_trajectories(net, 20, seed=2, min_hops=6, max_hops=12)
    for t, road in pairs:
        poly = replay_road_seq(net, road)
        for p in t.points:
            best = min(
                _point_to_segment(p, poly[i], poly[i + 1]) for i in range(len(poly) - 1)
            )
            assert best <= NOISE_BOUND + 1e-12


def _point_to_segment(p, a, b):
    ab = b - a
    t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


# ---------------------------------------------------------------- normalize

def test_normalize_examples():
    out = normalize(Trajectory(0, [(0, 0), (2, 0)]))
    assert np.allclose(out.points, [(-1, 0), (1, 0)])
    out2 = normalize(Trajectory(0, [(5, 5), (5, 7)]))
    assert np.allclose(out2.points, [(0, -1), (0, 1)])


def test_normalize_max_extent_exact():
    rng = np.random.default_rng(4)
    t = Trajectory(0, rng.normal(size=(30, 2)) * 7.0)
    out = normalize(t).points
    # direct min/max computation
    assert np.abs(out).max() == 1.0
    assert np.all(np.abs(out) <= 1.0)


def test_normalize_idempotent():
    rng = np.random.default_rng(9)
    for _ in range(10):
        t = Trajectory(0, rng.normal(size=(25, 2)) * rng.uniform(0.5, 50))
        once = normalize(t)
        twice = normalize(once)
        assert np.max(np.abs(twice.points - once.points)) <= 1e-12


def test_normalize_degenerate():
    with pytest.raises(DegenerateInputError):
        normalize(Trajectory(0, [(3, 3), (3, 3)]))


# ---------------------------------------------------------------- resample

def test_resample_linear_fallback():
    out = resample(Trajectory(0, [(0, 0), (3, 0)]), 4)
    assert np.allclose(out.points, [(0, 0), (1, 0), (2, 0), (3, 0)])


def test_resample_same_length_identity():
    pts = np.array([(0.0, 0), (1, 1), (2, 0), (3, 2)])
    out = resample(Trajectory(0, pts), 4)
    assert np.array_equal(out.points, pts)


def test_resample_endpoints_exact():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(9, 2))
    out = resample(Trajectory(0, pts), 31)
    assert np.array_equal(out.points[0], pts[0])
    assert np.array_equal(out.points[-1], pts[-1])
    assert len(out.points) == 31


def test_resample_matches_spline_oracle():
    pts = np.array([(0.0, 0.0), (1.0, 2.0), (2.5, 1.0), (4.0, 3.0), (5.0, 0.5)])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    s /= s[-1]
    u = np.linspace(0.0, 1.0, 50)
    expected_x = natural_spline_oracle(s, pts[:, 0], u)
    expected_y = natural_spline_oracle(s, pts[:, 1], u)
    out = resample(Trajectory(0, pts), 50).points
    assert np.max(np.abs(out[:, 0] - expected_x)) < 1e-9
    assert np.max(np.abs(out[:, 1] - expected_y)) < 1e-9


def test_resample_idempotent():
    rng = np.random.default_rng(8)
    pts = np.cumsum(rng.normal(size=(12, 2)), axis=0)
    once = resample(Trajectory(0, pts), 40)
    twice = resample(once, 40)
    assert np.max(np.abs(twice.points - once.points)) < 1e-9


def test_resample_parameter_errors():
    with pytest.raises(ParameterError):
        resample(Trajectory(0, [(0, 0), (1, 1)]), 1)


# ---------------------------------------------------------------- topology

def test_topology_collinear_keeps_endpoints():
    seq = extract_topology(Trajectory(0, [(0, 0), (1, 0), (2, 0)]), 0.01)
    assert np.allclose(seq.points, [(0, 0), (2, 0)])


def test_topology_right_angle_kept():
    seq = extract_topology(Trajectory(0, [(0, 0), (1, 0), (1, 1)]), 0.01, np.pi / 6)
    assert seq.k == 3


def test_topology_matches_recursive_oracle():
    rng = np.random.default_rng(13)
    # noisy L-shaped walk: 200 points along two legs
    leg1 = np.stack([np.linspace(0, 1, 100), np.zeros(100)], axis=1)
    leg2 = np.stack([np.ones(100), np.linspace(0, 1, 100)], axis=1)
    pts = np.concatenate([leg1, leg2]) + rng.normal(0, 0.002, size=(200, 2))
    t = Trajectory(0, pts)
    seq = extract_topology(t, 0.02, np.deg2rad(15))
    assert 3 <= seq.k <= 15

    from omnitraj.preprocess import normalize_points
    from omnitraj.extract import turning_angles

    norm = normalize_points(pts)
    idx = np.array(recursive_dp_oracle(norm, 0.02))
    if len(idx) > 2:
        keep = turning_angles(norm[idx]) >= np.deg2rad(15)
        idx = np.concatenate([[idx[0]], idx[1:-1][keep], [idx[-1]]])
    assert np.allclose(seq.points, pts[idx])


def test_topology_is_subsequence():
    net = generate_network(4, 5, 5, 0.2)
    for t, _ in generate_trajectories(net, 10, seed=6, min_hops=5, max_hops=12):
        seq = extract_topology(t)
        tuples = [tuple(p) for p in t.points]
        positions = [tuples.index(tuple(p)) for p in seq.points]
        assert positions == sorted(positions)
        assert seq.k <= t.n


# ---------------------------------------------------------------- regions

def test_region_single_point():
    grid = GridSpec(0, 0, 16, 16, 16, 16)
    seq = extract_regions(Trajectory(0, [(0.5, 0.5), (0.6, 0.5)]), grid)
    assert list(seq.region_ids) == [0]


def test_region_horizontal_path():
    grid = GridSpec(0, 0, 16, 16, 16, 16)
    t = Trajectory(0, [(0.5, 0.5), (1.5, 0.5), (2.5, 0.5)])
    assert list(extract_regions(t, grid).region_ids) == [0, 1, 2]


def test_region_boundary_goes_to_lower_cell():
    grid = GridSpec(0, 0, 16, 16, 16, 16)
    t = Trajectory(0, [(1.0, 0.5), (1.0, 0.6)])  # exactly on the col 0/1 line
    assert list(extract_regions(t, grid).region_ids) == [0]


def test_region_matches_bruteforce_oracle():
    net = generate_network(3, 6, 6, 0.2)
    grid = grid_for_network(net)
    (t, _), = generate_trajectories(net, 1, seed=12, min_hops=15, max_hops=20)
    seq = extract_regions(t, grid)

    def cell(v, lo, hi, n):
        u = (v - lo) / (hi - lo) * n
        c = int(np.ceil(u)) - 1
        return min(max(c, 0), n - 1)

    expected = []
    for x, y in t.points:
        cid = cell(y, grid.min_y, grid.max_y, grid.rows) * grid.cols + cell(
            x, grid.min_x, grid.max_x, grid.cols
        )
        if cid not in expected:
            expected.append(cid)
    assert list(seq.region_ids) == expected


def test_region_densification_invariance():
    grid = GridSpec(0, 0, 10, 10, 16, 16)
    rng = np.random.default_rng(3)
    pts = rng.uniform(1, 9, size=(12, 2))
    base = set(extract_regions(Trajectory(0, pts), grid).region_ids)

    dense = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        for frac in np.linspace(0, 1, 8)[1:]:
            dense.append(a + frac * (b - a))
    dense_set = set(extract_regions(Trajectory(0, np.asarray(dense)), grid).region_ids)
    assert base <= dense_set

    # nothing outside the polyline's cells (oracle: very fine sampling)
    fine = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        for frac in np.linspace(0, 1, 400)[1:]:
            fine.append(a + frac * (b - a))
    fine_set = set(extract_regions(Trajectory(0, np.asarray(fine)), grid).region_ids)
    assert dense_set <= fine_set


# ---------------------------------------------------------------- types & io

def test_roadseq_collapses_consecutive_duplicates():
    seq = RoadSeq(0, (1, 1, 2, 2, 2, 3, 1))
    assert seq.segment_ids == (1, 2, 3, 1)


def test_regionseq_first_visit_dedup():
    seq = RegionSeq(0, (5, 3, 5, 2, 3))
    assert seq.region_ids == (5, 3, 2)


def test_dataset_roundtrip(tmp_path):
    net = generate_network(2, 4, 4, 0.1)
    grid = grid_for_network(net)
    pairs = generate_trajectories(net, 5, seed=1, min_hops=4, max_hops=8)
    records = [DatasetRecord(t, road=r) for t, r in pairs]
    from omnitraj.dataio import ensure_views

    records = [ensure_views(r, grid) for r in records]
    path = tmp_path / "data.jsonl"
    write_dataset(records, path)
    write_dataset(records, tmp_path / "data2.jsonl")
    assert path.read_bytes() == (tmp_path / "data2.jsonl").read_bytes()

    loaded = read_dataset(path)
    assert len(loaded) == 5
    for orig, back in zip(records, loaded):
        assert np.allclose(orig.trajectory.points, back.trajectory.points)
        assert orig.road.segment_ids == back.road.segment_ids
        assert orig.region.region_ids == back.region.region_ids
        assert np.allclose(orig.topology.points, back.topology.points)


def test_network_roundtrip(tmp_path):
    net = generate_network(2, 4, 5, 0.2)
    grid = grid_for_network(net)
    path = tmp_path / "net.jsonl"
    write_network(net, grid, path)
    net2, grid2 = read_network(path)
    assert np.allclose(net.nodes, net2.nodes)
    assert np.array_equal(net.segments, net2.segments)
    assert grid == grid2
    # line-delimited json with dense ids
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines[0]["type"] == "meta"
