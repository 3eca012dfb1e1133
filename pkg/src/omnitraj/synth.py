"""Synthetic road-network and trajectory generation.

The network is a jittered lattice, the cheapest structure that still gives
ground-truth road labels, realistic turning behaviour, and controllable
statistics. Trajectories are random walks along segments, densified and
perturbed with bounded per-point noise, so the paired road sequence is exact
by construction.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import GenerationError, ParameterError
from .types import GridSpec, RoadNetwork, RoadSeq, Trajectory

# per-coordinate noise half-width, in lattice-spacing units; small enough
# that keypoint extraction at its default tolerance sees corners, not noise
NOISE_HALF_WIDTH = 0.02
# max point-to-polyline displacement the generator can introduce
NOISE_BOUND = NOISE_HALF_WIDTH * math.sqrt(2.0)
MIN_TRAJECTORY_POINTS = 20


def generate_network(seed: int, rows: int, cols: int, jitter: float = 0.2) -> RoadNetwork:
    """Jittered rows x cols lattice with unit spacing.

    Node id = row * cols + col; segment ids are dense, horizontal edges
    first. Deterministic for a fixed seed.
    """
    if rows < 2 or cols < 2:
        raise ParameterError("network needs at least a 2x2 lattice")
    if not (0.0 <= jitter < 0.5):
        raise ParameterError("jitter must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    base = np.stack(
        np.meshgrid(np.arange(cols, dtype=np.float64), np.arange(rows, dtype=np.float64)),
        axis=-1,
    ).reshape(-1, 2)
    nodes = base + rng.uniform(-jitter, jitter, size=base.shape)
    segments = []
    for r in range(rows):
        for c in range(cols - 1):
            segments.append((r * cols + c, r * cols + c + 1))
    for r in range(rows - 1):
        for c in range(cols):
            segments.append((r * cols + c, (r + 1) * cols + c))
    return RoadNetwork(nodes, np.asarray(segments, dtype=np.int64))


def _walk(net: RoadNetwork, adj, rng, hops: int) -> tuple[list[int], list[int]]:
    """Random segment walk avoiding immediate backtracking."""
    node = int(rng.integers(0, len(net.nodes)))
    path_nodes = [node]
    path_segs: list[int] = []
    prev_seg = -1
    for _ in range(hops):
        choices = [(sid, v) for sid, v in adj[node] if sid != prev_seg]
        if not choices:
            choices = list(adj[node])
        sid, node = choices[int(rng.integers(0, len(choices)))]
        path_nodes.append(node)
        path_segs.append(sid)
        prev_seg = sid
    return path_nodes, path_segs


def generate_trajectories(
    net: RoadNetwork,
    count: int,
    seed: int,
    min_hops: int = 8,
    max_hops: int = 20,
) -> list[tuple[Trajectory, RoadSeq]]:
    """Random-walk trajectories with their ground-truth road sequences.

    Each walk of h segments is densified to h * p + 1 points (p chosen so
    the total is at least MIN_TRAJECTORY_POINTS) and perturbed with uniform
    per-coordinate noise of half-width NOISE_HALF_WIDTH. Deterministic per
    seed; ids run 0..count-1.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    if min_hops < 3 or max_hops < min_hops:
        raise ParameterError("need max_hops >= min_hops >= 3")
    if not net.is_connected():
        raise GenerationError("road network is not connected")

    rng = np.random.default_rng(seed)
    adj = net.adjacency()
    out: list[tuple[Trajectory, RoadSeq]] = []
    for tid in range(count):
        hops = int(rng.integers(min_hops, max_hops + 1))
        path_nodes, path_segs = _walk(net, adj, rng, hops)
        per_edge = max(6, math.ceil((MIN_TRAJECTORY_POINTS - 1) / hops))
        coords = net.nodes[path_nodes]
        pts = []
        for a, b in zip(coords[:-1], coords[1:]):
            frac = np.arange(per_edge, dtype=np.float64)[:, None] / per_edge
            pts.append(a + frac * (b - a))
        pts.append(coords[-1:])
        poly = np.concatenate(pts, axis=0)
        noise = rng.uniform(-NOISE_HALF_WIDTH, NOISE_HALF_WIDTH, size=poly.shape)
        out.append((Trajectory(tid, poly + noise), RoadSeq(tid, tuple(path_segs))))
    return out


def replay_road_seq(net: RoadNetwork, seq: RoadSeq) -> np.ndarray:
    """Node polyline obtained by chaining the walk's segments in order."""
    segs = [tuple(int(v) for v in net.segments[sid]) for sid in seq.segment_ids]
    if len(segs) == 1:
        return net.nodes[list(segs[0])]
    # orient the first segment so it ends on the node shared with the second
    a, b = segs[0]
    nodes = [b, a] if a in segs[1] else [a, b]
    for sa, sb in segs[1:]:
        nodes.append(sb if sa == nodes[-1] else sa)
    return net.nodes[nodes]


def grid_for_network(net: RoadNetwork, rows: int = 16, cols: int = 16, margin: float = 0.1) -> GridSpec:
    """Region grid covering the network bbox plus a noise margin."""
    min_x, min_y, max_x, max_y = net.bbox
    pad = margin + NOISE_BOUND
    return GridSpec(min_x - pad, min_y - pad, max_x + pad, max_y + pad, rows, cols)
