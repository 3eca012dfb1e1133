"""Coordinate normalization and fixed-length resampling."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateInputError, ParameterError
from .types import Trajectory


def normalize(t: Trajectory) -> Trajectory:
    """Translate to the centroid and scale by the maximum absolute extent.

    A single shared scale is used for both axes, so aspect ratio is
    preserved and every output coordinate lies in [-1, 1]. Raises
    DegenerateInputError when all points coincide.
    """
    pts = t.points
    centered = pts - pts.mean(axis=0)
    extent = np.abs(centered).max()
    if extent == 0.0:
        raise DegenerateInputError(f"trajectory {t.id} collapses to a single point")
    return Trajectory(t.id, centered / extent)


def normalize_points(points: np.ndarray) -> np.ndarray:
    """normalize() on a bare point array; degenerate input maps to zeros."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    extent = np.abs(centered).max(initial=0.0)
    if extent == 0.0:
        return np.zeros_like(pts)
    return centered / extent


def _chord_parameter(pts: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        raise DegenerateInputError("zero-length trajectory cannot be resampled")
    return s / s[-1]


def resample(t: Trajectory, length: int) -> Trajectory:
    """Resample to exactly `length` points on a uniform chord-length grid.

    Uses a natural cubic spline over the normalized cumulative chord-length
    parameter when 4 or more distinct knots are available, piecewise-linear
    interpolation otherwise. Endpoints are preserved exactly, and a
    trajectory already at the requested length is returned unchanged (which
    makes repeated resampling a strict no-op).
    """
    if length < 2:
        raise ParameterError("resample length must be >= 2")
    pts = t.points
    if len(pts) == length:
        return t

    # consecutive duplicates would give non-increasing spline knots
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    knots = pts[keep]
    if len(knots) < 2:
        raise DegenerateInputError("all points identical")

    s = _chord_parameter(knots)
    u = np.linspace(0.0, 1.0, length)
    if len(knots) >= 4:
        spline = CubicSpline(s, knots, axis=0, bc_type="natural")
        out = spline(u)
    else:
        out = np.stack(
            [np.interp(u, s, knots[:, 0]), np.interp(u, s, knots[:, 1])], axis=1
        )
    out[0] = pts[0]
    out[-1] = pts[-1]
    return Trajectory(t.id, out)
