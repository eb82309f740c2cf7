import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gncpnp.core import Pose, pose_from_axis_angle
from gncpnp.errors import EmptyInput, EmptyModel, InvalidConfig
from gncpnp.metrics import ModelPoints, accuracy_at, add, add_s, auc, evaluate, model_diameter, subsample_vertices

from conftest import random_pose


@pytest.fixture
def model():
    return ModelPoints(np.random.default_rng(0).uniform(-0.05, 0.05, (100, 3)))


def test_add_examples(model):
    ident = Pose.identity()
    assert add(model, ident, ident) == 0.0
    shifted = Pose(np.eye(3), [0.01, 0, 0])
    assert add(model, shifted, ident) == pytest.approx(0.01, abs=1e-15)


def test_add_matches_per_vertex_mean(model):
    rng = np.random.default_rng(1)
    a, b = random_pose(rng), random_pose(rng)
    oracle = sum(
        math.dist(a.rotation @ x + a.translation, b.rotation @ x + b.translation) for x in model.vertices
    ) / len(model)
    assert add(model, a, b) == pytest.approx(oracle, abs=1e-12)


def test_add_s_symmetric_pair():
    m = ModelPoints([[1.0, 0, 0], [-1.0, 0, 0]])
    flip = pose_from_axis_angle([0, 0, math.pi], [0, 0, 0])
    assert add_s(m, flip, Pose.identity()) == pytest.approx(0.0, abs=1e-12)
    assert add(m, flip, Pose.identity()) == pytest.approx(2.0, abs=1e-12)


def test_add_s_matches_brute_force():
    rng = np.random.default_rng(2)
    v = rng.uniform(-0.1, 0.1, (200, 3))
    m = ModelPoints(v)
    for _ in range(20):
        a, b = random_pose(rng), random_pose(rng)
        est, gt = a.transform(v), b.transform(v)
        d = np.sqrt(((est[:, None, :] - gt[None, :, :]) ** 2).sum(-1)).min(axis=1)
        assert add_s(m, a, b) == pytest.approx(d.mean(), abs=1e-12)


def test_add_s_never_exceeds_add():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        m = ModelPoints(rng.normal(size=(int(rng.integers(2, 40)), 3)))
        a, b = random_pose(rng), random_pose(rng)
        assert add_s(m, a, b) <= add(m, a, b)


def test_common_left_composition_invariance(model):
    rng = np.random.default_rng(4)
    for _ in range(50):
        g, a, b = random_pose(rng), random_pose(rng), random_pose(rng)
        assert add(model, g.compose(a), g.compose(b)) == pytest.approx(add(model, a, b), abs=1e-12)
        assert add_s(model, g.compose(a), g.compose(b)) == pytest.approx(add_s(model, a, b), abs=1e-12)


def test_empty_model():
    with pytest.raises(EmptyModel):
        ModelPoints(np.zeros((0, 3)))
    with pytest.raises(EmptyModel):
        add(np.zeros((0, 3)), Pose.identity(), Pose.identity())


def test_auc_examples():
    assert auc([0.0, 0.0], 0.1) == 1.0
    assert auc([0.1, 0.5], 0.1) == 0.0
    assert auc([0.05], 0.1) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(EmptyInput):
        auc([], 0.1)


@given(st.floats(0.0, 0.0999), st.floats(0.1, 1.0))
def test_auc_single_error(e, t):
    assert auc([e], t) == pytest.approx(1 - e / t, abs=1e-15)


def test_auc_matches_riemann_sum():
    rng = np.random.default_rng(5)
    for _ in range(50):
        e = rng.exponential(0.04, int(rng.integers(1, 200)))
        t = 0.1
        d = (np.arange(10_000) + 0.5) * t / 10_000
        riemann = np.mean([np.mean(e < di) for di in d])
        assert auc(e, t) == pytest.approx(riemann, abs=1e-3)


def test_accuracy_examples():
    assert accuracy_at([0.001, 0.5], 0.01) == 0.5
    assert accuracy_at([0.001, 0.002], 0.01) == 1.0
    assert accuracy_at([0.01], 0.01) == 0.0
    with pytest.raises(EmptyInput):
        accuracy_at([], 0.01)
    with pytest.raises(InvalidConfig):
        accuracy_at([0.1], 0.0)


def test_diameter_rules():
    cube = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    assert model_diameter(cube) == pytest.approx(math.sqrt(3))
    big = np.random.default_rng(6).uniform(0, 1, (2500, 3))
    assert model_diameter(big) == pytest.approx(np.linalg.norm(big.max(0) - big.min(0)))
    assert len(subsample_vertices(np.zeros((12000, 3)))) <= 5000
    with pytest.raises(InvalidConfig):
        ModelPoints(cube, diameter=0.5)


def test_evaluate_report(model):
    rep = evaluate(model, Pose(np.eye(3), [0.001, 0, 0]), Pose.identity())
    assert rep.add_s <= rep.add
    assert 0.0 <= rep.add_auc <= 1.0 and 0.0 <= rep.add_s_auc <= 1.0
    assert rep.add_below_0_1d
