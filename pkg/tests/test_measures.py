import time
from functools import lru_cache

import numpy as np
import pytest

from omnitraj import dtw, edr, frechet, hausdorff
from omnitraj.errors import ParameterError
from omnitraj.measures import read_distance_matrix, write_distance_matrix


# ---------------------------------------------------------------- oracles

def dtw_oracle(a, b):
    """Memoized-recursion DTW."""
    a = [tuple(p) for p in a]
    b = [tuple(p) for p in b]

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i < 0 and j < 0:
            return 0.0
        if i < 0 or j < 0:
            return float("inf")
        d = np.hypot(a[i][0] - b[j][0], a[i][1] - b[j][1])
        return d + min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1))

    return rec(len(a) - 1, len(b) - 1)


def edr_oracle(a, b, eps):
    a = [tuple(p) for p in a]
    b = [tuple(p) for p in b]

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        pa, pb = a[i - 1], b[j - 1]
        match = abs(pa[0] - pb[0]) <= eps and abs(pa[1] - pb[1]) <= eps
        return min(
            rec(i - 1, j - 1) + (0 if match else 1),
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
        )

    return rec(len(a), len(b))


def hausdorff_oracle(a, b):
    def directed(p, q):
        return max(min(np.linalg.norm(x - y) for y in q) for x in p)

    return max(directed(a, b), directed(b, a))


def frechet_oracle(a, b):
    a = [np.asarray(p) for p in a]
    b = [np.asarray(p) for p in b]

    @lru_cache(maxsize=None)
    def rec(i, j):
        d = float(np.linalg.norm(a[i] - b[j]))
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(rec(0, j - 1), d)
        if j == 0:
            return max(rec(i - 1, 0), d)
        return max(min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1)), d)

    return rec(len(a) - 1, len(b) - 1)


def random_pair(rng, max_len=30):
    na, nb = rng.integers(2, max_len + 1, size=2)
    return rng.normal(size=(na, 2)), rng.normal(size=(nb, 2))


# ---------------------------------------------------------------- examples

def test_dtw_examples():
    a = np.array([(0.0, 0), (1, 0)])
    assert dtw(a, a) == 0.0
    assert dtw(np.array([(0.0, 0)]), np.array([(3.0, 4)])) == 5.0
    assert dtw(np.array([(0.0, 0), (2, 0)]), np.array([(0.0, 0), (1, 0), (2, 0)])) == 1.0


def test_edr_examples():
    a = np.array([(0.0, 0), (1, 1), (2, 0)])
    assert edr(a, a, 0.1) == 0
    assert edr(np.array([(0.0, 0)]), np.array([(10.0, 10)]), 1.0) == 1


def test_hausdorff_examples():
    a = np.array([(0.0, 0), (1, 0)])
    assert hausdorff(a, a) == 0.0
    assert hausdorff(np.array([(0.0, 0)]), np.array([(3.0, 4)])) == 5.0
    assert hausdorff(np.array([(0.0, 0), (1, 0)]), np.array([(0.0, 0)])) == 1.0


def test_frechet_examples():
    a = np.array([(0.0, 0), (1, 0), (2, 0)])
    assert frechet(a, a) == 0.0
    assert frechet(np.array([(0.0, 0)]), np.array([(3.0, 4)])) == 5.0
    b = np.array([(0.0, 1), (1, 1), (2, 1)])
    assert frechet(a, b) == 1.0


def test_empty_inputs_rejected():
    empty = np.zeros((0, 2))
    point = np.array([(0.0, 0)])
    for fn in (dtw, hausdorff, frechet):
        with pytest.raises(ParameterError):
            fn(empty, point)
    with pytest.raises(ParameterError):
        edr(empty, point, 0.1)


# ---------------------------------------------------------------- oracle equivalence

def test_oracle_equivalence_on_random_pairs():
    rng = np.random.default_rng(42)
    start = time.time()
    for _ in range(200):
        a, b = random_pair(rng, max_len=18)
        assert dtw(a, b) == pytest.approx(dtw_oracle(a, b), abs=1e-9)
        assert edr(a, b, 0.5) == edr_oracle(a, b, 0.5)
        assert hausdorff(a, b) == pytest.approx(hausdorff_oracle(a, b), abs=1e-12)
        assert frechet(a, b) == pytest.approx(frechet_oracle(a, b), abs=1e-12)
    assert time.time() - start < 30


def test_edr_seeded_12_point_oracle():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(12, 2))
    b = rng.normal(size=(12, 2))
    assert edr(a, b, 0.5) == edr_oracle(a, b, 0.5)


# ---------------------------------------------------------------- properties

def test_symmetry():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a, b = random_pair(rng, max_len=12)
        assert dtw(a, b) == dtw(b, a)
        assert hausdorff(a, b) == hausdorff(b, a)
        assert frechet(a, b) == frechet(b, a)


def test_frechet_dominates_hausdorff():
    rng = np.random.default_rng(12)
    for _ in range(100):
        a, b = random_pair(rng, max_len=15)
        assert frechet(a, b) >= hausdorff(a, b) - 1e-12


def test_identity_is_zero():
    rng = np.random.default_rng(13)
    for _ in range(20):
        a, _ = random_pair(rng)
        assert dtw(a, a) == 0.0
        assert edr(a, a, 0.5) == 0


def test_quadratic_runtime_scaling():
    rng = np.random.default_rng(14)
    a1, b1 = rng.normal(size=(60, 2)), rng.normal(size=(60, 2))
    a2, b2 = rng.normal(size=(120, 2)), rng.normal(size=(120, 2))

    def timed(fn, a, b, reps=5):
        best = float("inf")
        for _ in range(reps):
            t0 = time.perf_counter()
            fn(a, b)
            best = min(best, time.perf_counter() - t0)
        return best

    t_small = timed(dtw, a1, b1)
    t_big = timed(dtw, a2, b2)
    ratio = t_big / t_small
    # doubling both lengths quadruples the DP table; allow a 2x band
    assert 2.0 <= ratio <= 8.0


# ---------------------------------------------------------------- matrix dump

def test_distance_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(15)
    m = np.abs(rng.normal(size=(4, 7))).astype(np.float32)
    path = tmp_path / "dist.otdm"
    write_distance_matrix(path, m, "dtw")
    back, name = read_distance_matrix(path)
    assert name == "dtw"
    assert np.array_equal(back, m)
    assert path.stat().st_size == 16 + 4 * 4 * 7
    assert path.read_bytes()[:4] == b"OTDM"
