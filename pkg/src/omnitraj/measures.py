"""Classical trajectory distances: DTW, EDR, Hausdorff, discrete Fréchet.

These are the exact dynamic-programming formulations (no lower-bounding or
early abandoning); they double as retrieval-correctness oracles. All take
(n, 2) point arrays and use the Euclidean ground distance.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParameterError

MEASURE_IDS = {"dtw": 1, "edr": 2, "hausdorff": 3, "frechet": 4}

_DM_MAGIC = b"OTDM"


def _check(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 2 or b.shape[1] != 2:
        raise ParameterError("inputs must be (n, 2) point arrays")
    if len(a) == 0 or len(b) == 0:
        raise ParameterError("empty point sequence")
    return a, b


def dtw(a: np.ndarray, b: np.ndarray) -> float:
    """Dynamic time warping alignment cost (sum of matched distances)."""
    a, b = _check(a, b)
    d = cdist(a, b)
    n, m = d.shape
    c = np.full((n + 1, m + 1), np.inf)
    c[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c[i, j] = d[i - 1, j - 1] + min(c[i - 1, j], c[i, j - 1], c[i - 1, j - 1])
    return float(c[n, m])


def edr(a: np.ndarray, b: np.ndarray, eps: float) -> int:
    """Edit distance on real sequences.

    Two points match (cost 0) when both |dx| <= eps and |dy| <= eps;
    otherwise substitution/insertion/deletion each cost 1. Returns the raw
    integer edit count in [0, max(|a|, |b|)].
    """
    a, b = _check(a, b)
    if eps < 0:
        raise ParameterError("eps must be >= 0")
    match = (np.abs(a[:, None, 0] - b[None, :, 0]) <= eps) & (
        np.abs(a[:, None, 1] - b[None, :, 1]) <= eps
    )
    n, m = match.shape
    c = np.zeros((n + 1, m + 1), dtype=np.int64)
    c[:, 0] = np.arange(n + 1)
    c[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = c[i - 1, j - 1] + (0 if match[i - 1, j - 1] else 1)
            c[i, j] = min(sub, c[i - 1, j] + 1, c[i, j - 1] + 1)
    return int(c[n, m])


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance (max of the two directed distances)."""
    a, b = _check(a, b)
    d = cdist(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def frechet(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Fréchet distance via the standard coupling recurrence."""
    a, b = _check(a, b)
    d = cdist(a, b)
    n, m = d.shape
    c = np.full((n + 1, m + 1), np.inf)
    c[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c[i, j] = max(d[i - 1, j - 1], min(c[i - 1, j], c[i, j - 1], c[i - 1, j - 1]))
    return float(c[n, m])


def write_distance_matrix(path: str | Path, matrix: np.ndarray, measure: str) -> None:
    """Dump a distance matrix: 16-byte header (magic, rows, cols, measure id)
    followed by the row-major little-endian f32 payload."""
    if measure not in MEASURE_IDS:
        raise ParameterError(f"unknown measure {measure!r}")
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise ParameterError("distance matrix must be 2-D")
    with open(path, "wb") as f:
        f.write(_DM_MAGIC)
        f.write(struct.pack("<III", m.shape[0], m.shape[1], MEASURE_IDS[measure]))
        f.write(m.tobytes())


def read_distance_matrix(path: str | Path) -> tuple[np.ndarray, str]:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16 or header[:4] != _DM_MAGIC:
            raise ParameterError("not a distance-matrix file")
        rows, cols, mid = struct.unpack("<III", header[4:])
        payload = np.frombuffer(f.read(rows * cols * 4), dtype="<f4")
    names = {v: k for k, v in MEASURE_IDS.items()}
    if mid not in names:
        raise ParameterError(f"unknown measure id {mid}")
    return payload.reshape(rows, cols).astype(np.float32), names[mid]
