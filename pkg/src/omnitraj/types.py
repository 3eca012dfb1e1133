"""Core trajectory domain types.

A trajectory is an ordered 2-D point sequence; its three derived views are
the topology keypoints, the road-segment id walk, and the set of grid
regions it intersects. All types are immutable after construction (point
arrays are marked read-only) and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError(f"expected an (n, 2) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")
    pts = pts.copy()
    pts.flags.writeable = False
    return pts


@dataclass(frozen=True)
class Trajectory:
    """Ordered (x, y) point sequence in map units."""

    id: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))
        if len(self.points) < 2:
            raise ParameterError("a trajectory needs at least 2 points")

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TopologySeq:
    """Geometrically significant subsequence of a trajectory's points."""

    trajectory_id: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))
        if len(self.points) < 1:
            raise ParameterError("topology sequence must be non-empty")

    @property
    def k(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RoadSeq:
    """Ordered road-segment ids traversed by a trajectory.

    Consecutive duplicates are collapsed: a segment appears once per
    contiguous traversal.
    """

    trajectory_id: int
    segment_ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.segment_ids)
        if not ids:
            raise ParameterError("road sequence must be non-empty")
        if any(i < 0 for i in ids):
            raise ParameterError("segment ids must be non-negative")
        ids = tuple(i for j, i in enumerate(ids) if j == 0 or i != ids[j - 1])
        object.__setattr__(self, "segment_ids", ids)

    def __len__(self) -> int:
        return len(self.segment_ids)


@dataclass(frozen=True)
class RegionSeq:
    """Grid-cell ids intersected by a trajectory, in first-visit order."""

    trajectory_id: int
    region_ids: tuple[int, ...]

    def __post_init__(self):
        seen: dict[int, None] = {}
        for i in self.region_ids:
            seen.setdefault(int(i), None)
        ids = tuple(seen.keys())
        if not ids:
            raise ParameterError("region sequence must be non-empty")
        if any(i < 0 for i in ids):
            raise ParameterError("region ids must be non-negative")
        object.__setattr__(self, "region_ids", ids)

    def __len__(self) -> int:
        return len(self.region_ids)


@dataclass(frozen=True)
class RoadNetwork:
    """Undirected road graph: node coordinates plus (a, b) segment endpoints.

    Segment ids are dense in [0, len(segments)); the id of a segment is its
    row index.
    """

    nodes: np.ndarray = field(repr=False)
    segments: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        segs = np.asarray(self.segments, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ParameterError("nodes must be an (n, 2) array")
        if segs.ndim != 2 or segs.shape[1] != 2:
            raise ParameterError("segments must be an (m, 2) array of node ids")
        if len(segs) and (segs.min() < 0 or segs.max() >= len(nodes)):
            raise ParameterError("segment endpoint outside node range")
        if np.any(segs[:, 0] == segs[:, 1]):
            raise ParameterError("self-loop segment")
        nodes = nodes.copy()
        segs = segs.copy()
        nodes.flags.writeable = False
        segs.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "segments", segs)

    @property
    def num_segments(self) -> int:
        return len(self.segments)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (
            float(self.nodes[:, 0].min()),
            float(self.nodes[:, 1].min()),
            float(self.nodes[:, 0].max()),
            float(self.nodes[:, 1].max()),
        )

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-node list of (segment_id, other_node) pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(len(self.nodes))]
        for sid, (a, b) in enumerate(self.segments):
            adj[int(a)].append((sid, int(b)))
            adj[int(b)].append((sid, int(a)))
        return adj

    def is_connected(self) -> bool:
        if len(self.nodes) == 0:
            return False
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for _, v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class GridSpec:
    """G x G partition of a bounding box into region cells.

    Cell id = row * cols + col. Points exactly on an interior gridline
    belong to the lower-index cell; points outside the box clamp to the
    nearest cell.
    """

    min_x: float
    min_y: float
    max_x: float
    max_y: float
    rows: int = 16
    cols: int = 16

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise ParameterError("grid bounding box must have positive extent")
        if self.rows < 1 or self.cols < 1:
            raise ParameterError("grid must have at least one row and column")

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols

    def _axis_cell(self, v: float, lo: float, hi: float, n: int) -> int:
        u = (v - lo) / (hi - lo) * n
        # ceil(u) - 1 sends exact gridline hits to the lower cell
        c = math.ceil(u) - 1
        return min(max(c, 0), n - 1)

    def cell_of(self, x: float, y: float) -> int:
        row = self._axis_cell(y, self.min_y, self.max_y, self.rows)
        col = self._axis_cell(x, self.min_x, self.max_x, self.cols)
        return row * self.cols + col
