import numpy as np
import pytest

from gncpnp.core import CameraIntrinsics, CorrespondenceSet, Pose, pose_from_axis_angle
from gncpnp.errors import BehindCamera
from gncpnp.projection import project, residual_jacobian, residuals

from conftest import random_pose


def test_project_examples(k):
    ident = Pose.identity()
    np.testing.assert_array_equal(project(k, ident, [0, 0, 1]), [320, 240])
    np.testing.assert_allclose(project(k, ident, [0.1, 0, 1]), [380, 240])
    with pytest.raises(BehindCamera):
        project(k, ident, [0, 0, -1])


def test_residual_examples(k):
    ident = Pose.identity()
    c = CorrespondenceSet([[320, 240], [323, 244], [0, 0]], [[0, 0, 1], [0, 0, 1], [0, 0, -1]])
    r = residuals(k, ident, c)
    assert r[0] == 0.0
    assert r[1] == 25.0
    assert r[2] == np.inf


def test_residuals_permute_with_input(k):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.1, 0.1, (20, 3)) + [0, 0, 1]
    px = rng.uniform(0, 640, (20, 2))
    perm = rng.permutation(20)
    pose = pose_from_axis_angle([0.1, 0.2, 0.0], [0, 0, 0.1])
    r = residuals(k, pose, CorrespondenceSet(px, pts))
    rp = residuals(k, pose, CorrespondenceSet(px[perm], pts[perm]))
    np.testing.assert_array_equal(r[perm], rp)


def test_project_matches_pretransformed_point(k):
    rng = np.random.default_rng(2)
    for _ in range(100):
        pose = random_pose(rng)
        X = rng.uniform(-0.1, 0.1, 3)
        a = project(k, pose, X)
        b = project(k, Pose.identity(), pose.transform(X))
        np.testing.assert_array_equal(a, b)


def _fd_jacobian(k, pose, X, h=1e-6):
    J = np.zeros((2, 6))
    for j in range(6):
        d = np.zeros(6)
        d[j] = h
        J[:, j] = (project(k, pose.perturb_left(d), X) - project(k, pose.perturb_left(-d), X)) / (2 * h)
    return J


def test_translation_columns_on_optical_axis(k):
    J = residual_jacobian(k, Pose.identity(), [0, 0, 1])
    assert J[0, 3] == pytest.approx(600.0)
    assert J[1, 4] == pytest.approx(600.0)
    assert J[0, 5] == 0.0 and J[1, 5] == 0.0
    assert J[0, 4] == 0.0
    np.testing.assert_allclose(J, _fd_jacobian(k, Pose.identity(), np.array([0.0, 0.0, 1.0])), atol=1e-3)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        f = rng.uniform(300, 1200)
        kk = CameraIntrinsics(f, f * rng.uniform(0.9, 1.1), rng.uniform(200, 400), rng.uniform(150, 300), 640, 480)
        pose = random_pose(rng, depth=(0.3, 3.0))
        # sample in the camera frame so the depth lies in [0.3, 3] m
        Xc = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.3, 3.0)])
        X = pose.inverse().transform(Xc)
        J = residual_jacobian(kk, pose, X)
        F = _fd_jacobian(kk, pose, X)
        assert np.all(np.abs(J - F) <= np.maximum(1e-4 * np.abs(F), 1e-6))
