import numpy as np
import pytest

from gncpnp.core import CameraIntrinsics, pose_from_axis_angle


@pytest.fixture
def k() -> CameraIntrinsics:
    return CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)


def random_pose(rng, depth=(0.5, 1.5)):
    axis = rng.normal(size=3)
    axis *= rng.uniform(0, np.pi) / np.linalg.norm(axis)
    t = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(*depth)])
    return pose_from_axis_angle(axis, t)
