"""Derivation of the topology and region views from a raw trajectory.

Topology keypoints are the trajectory points that survive Douglas-Peucker
simplification and still bend the simplified polyline by at least a minimum
turning angle. Regions are the grid cells containing at least one point,
reported in first-visit order.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .preprocess import normalize_points
from .types import GridSpec, RegionSeq, TopologySeq, Trajectory

DEFAULT_EPSILON = 0.02  # normalized units
DEFAULT_ANGLE_MIN = np.deg2rad(15.0)


def _point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    tt = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + tt[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def douglas_peucker_mask(pts: np.ndarray, epsilon: float) -> np.ndarray:
    """Boolean keep-mask of the stack-based Douglas-Peucker simplification."""
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        interior = pts[lo + 1 : hi]
        d = _point_segment_distance(interior, pts[lo], pts[hi])
        imax = int(np.argmax(d))
        if d[imax] > epsilon:
            split = lo + 1 + imax
            keep[split] = True
            stack.append((lo, split))
            stack.append((split, hi))
    return keep


def turning_angles(pts: np.ndarray) -> np.ndarray:
    """Absolute heading change at each interior vertex of a polyline."""
    v_in = pts[1:-1] - pts[:-2]
    v_out = pts[2:] - pts[1:-1]
    cross = v_in[:, 0] * v_out[:, 1] - v_in[:, 1] * v_out[:, 0]
    dot = np.sum(v_in * v_out, axis=1)
    return np.abs(np.arctan2(cross, dot))


def extract_topology(
    t: Trajectory,
    epsilon: float = DEFAULT_EPSILON,
    angle_min: float = DEFAULT_ANGLE_MIN,
) -> TopologySeq:
    """Keypoints: endpoints plus Douglas-Peucker survivors turning >= angle_min.

    Simplification runs on the trajectory normalized to its local frame, so
    `epsilon` is in normalized units; the returned points are the original
    (un-normalized) trajectory points at the surviving indices.
    """
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    pts = t.points
    norm = normalize_points(pts)
    idx = np.flatnonzero(douglas_peucker_mask(norm, epsilon))
    if len(idx) > 2 and angle_min > 0:
        angles = turning_angles(norm[idx])
        interior_keep = angles >= angle_min
        idx = np.concatenate([[idx[0]], idx[1:-1][interior_keep], [idx[-1]]])
    return TopologySeq(t.id, pts[idx])


def extract_regions(t: Trajectory, grid: GridSpec) -> RegionSeq:
    """Grid cells in first-visit order; out-of-box points clamp to the edge."""
    if t.n == 0:
        raise ParameterError("empty trajectory")
    cells = [grid.cell_of(float(x), float(y)) for x, y in t.points]
    return RegionSeq(t.id, tuple(cells))
