import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gncpnp.errors import EmptyInput, InvalidConfig
from gncpnp.geom_weight import VoxelGridConfig, compute_weights, voxel_index


def brute_force_weights(points, v, w_min):
    g = np.floor(np.asarray(points) / v)
    n = len(g)
    s = np.array([sum(bool(np.all(g[i] == g[j])) for j in range(n)) for i in range(n)])
    return s, w_min + (1 - w_min) * s / s.max()


def test_voxel_index_examples():
    np.testing.assert_array_equal(voxel_index([0, 0, 0], 0.005), [0, 0, 0])
    np.testing.assert_array_equal(voxel_index([0.012, 0.005, -0.001], 0.005), [2, 1, -1])
    np.testing.assert_array_equal(voxel_index([0.0049999, 0, 0], 0.005), [0, 0, 0])


def test_single_voxel_gets_full_weight():
    pts = np.full((10, 3), 0.001)
    w = compute_weights(pts, VoxelGridConfig(0.005, 0.2))
    np.testing.assert_array_equal(w.weight, 1.0)
    np.testing.assert_array_equal(w.support, 10)


def test_nine_to_one_split():
    pts = np.vstack([np.full((9, 3), 0.001), [[0.011, 0.001, 0.001]]])
    w = compute_weights(pts, VoxelGridConfig(0.005, 0.2))
    assert w.weight[-1] == pytest.approx(0.2 + 0.8 / 9, abs=1e-15)
    assert w.weight[-1] == pytest.approx(0.2889, abs=1e-4)
    _, oracle = brute_force_weights(pts, 0.005, 0.2)
    np.testing.assert_allclose(w.weight, oracle, rtol=0, atol=1e-15)


def test_single_point():
    assert compute_weights([[1.0, 2.0, 3.0]]).weight[0] == 1.0


def test_empty_input():
    with pytest.raises(EmptyInput):
        compute_weights(np.zeros((0, 3)))


@pytest.mark.parametrize("kwargs", [dict(voxel_size=0.0), dict(w_min=1.0), dict(w_min=-0.1)])
def test_config_invariants(kwargs):
    with pytest.raises(InvalidConfig):
        VoxelGridConfig(**kwargs)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    for trial in range(30):
        n = int(rng.integers(1, 501))
        # a coarse cube keeps plenty of shared voxels
        pts = rng.uniform(-0.02, 0.02, (n, 3))
        w_min = float(rng.uniform(0, 0.9))
        s, oracle = brute_force_weights(pts, 0.005, w_min)
        got = compute_weights(pts, VoxelGridConfig(0.005, w_min))
        np.testing.assert_array_equal(got.support, s)
        np.testing.assert_allclose(got.weight, oracle, rtol=0, atol=1e-15)


points_strategy = st.integers(1, 60).flatmap(
    lambda n: arrays(np.float64, (n, 3), elements=st.floats(-0.05, 0.05, allow_nan=False))
)


dyadic_points = st.integers(1, 60).flatmap(
    lambda n: arrays(np.int64, (n, 3), elements=st.integers(-(2**16), 2**16))
).map(lambda a: a * 2.0**-20)


@given(dyadic_points, st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_integer_voxel_shift_invariance(pts, a, b, c):
    # dyadic coordinates and voxel keep the shifted points exact in floating point
    v = 2.0**-7
    cfg = VoxelGridConfig(v, 0.2)
    shifted = pts + np.array([a, b, c]) * v
    assert np.array_equal(np.floor(shifted / v), np.floor(pts / v) + [a, b, c])
    np.testing.assert_array_equal(compute_weights(pts, cfg).weight, compute_weights(shifted, cfg).weight)


@given(points_strategy, st.floats(0.0, 0.99), st.randoms(use_true_random=False))
def test_range_and_permutation_equivariance(pts, w_min, rnd):
    cfg = VoxelGridConfig(0.01, w_min)
    w = compute_weights(pts, cfg).weight
    assert np.all(w >= w_min) and np.all(w <= 1.0)
    assert np.max(w) == 1.0
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(compute_weights(pts[perm], cfg).weight, w[perm])
