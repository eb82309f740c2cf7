"""Pinhole projection, squared reprojection residuals and their Jacobian."""

from __future__ import annotations

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, Pose
from .errors import BehindCamera

DEPTH_EPSILON = 1e-6


def project(k: CameraIntrinsics, pose: Pose, point, depth_epsilon: float = DEPTH_EPSILON) -> np.ndarray:
    xc = pose.rotation @ np.asarray(point, dtype=np.float64) + pose.translation
    if not xc[2] > depth_epsilon:
        raise BehindCamera(f"camera-frame depth {xc[2]!r} <= {depth_epsilon}")
    return np.array([k.fx * xc[0] / xc[2] + k.cx, k.fy * xc[1] / xc[2] + k.cy])


def project_points(
    k: CameraIntrinsics, pose: Pose, points, depth_epsilon: float = DEPTH_EPSILON
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection.

    Returns ``(uv, valid)``; rows where ``valid`` is False are behind the
    camera and hold NaN.
    """
    xc = pose.transform(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = xc[:, 2]
    valid = z > depth_epsilon
    uv = np.full((len(xc), 2), np.nan)
    zv = z[valid]
    uv[valid, 0] = k.fx * xc[valid, 0] / zv + k.cx
    uv[valid, 1] = k.fy * xc[valid, 1] / zv + k.cy
    return uv, valid


def residuals(
    k: CameraIntrinsics, pose: Pose, c: CorrespondenceSet, depth_epsilon: float = DEPTH_EPSILON
) -> np.ndarray:
    """Squared pixel distance per correspondence; +inf behind the camera."""
    uv, valid = project_points(k, pose, c.points, depth_epsilon)
    d = uv - c.pixels
    r = np.full(len(c), np.inf)
    r[valid] = np.einsum("ij,ij->i", d[valid], d[valid])
    return r


def reprojection_errors(k: CameraIntrinsics, pose: Pose, c: CorrespondenceSet) -> np.ndarray:
    """Unsquared pixel distance; +inf behind the camera."""
    return np.sqrt(residuals(k, pose, c))


def stacked_jacobians(
    k: CameraIntrinsics, pose: Pose, points, depth_epsilon: float = DEPTH_EPSILON
) -> tuple[np.ndarray, np.ndarray]:
    """Projections and their (N, 2, 6) Jacobians under a left perturbation.

    The perturbation is ``exp(dw) ∘ pose`` followed by a translation ``dt``,
    so a camera-frame point moves by ``-[Xc]x dw + dt``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    xc = pose.transform(pts)
    z = xc[:, 2]
    if np.any(z <= depth_epsilon):
        raise BehindCamera("a point lies behind the camera")
    inv_z = 1.0 / z
    x, y = xc[:, 0], xc[:, 1]
    uv = np.stack([k.fx * x * inv_z + k.cx, k.fy * y * inv_z + k.cy], axis=1)

    n = len(pts)
    dproj = np.zeros((n, 2, 3))
    dproj[:, 0, 0] = k.fx * inv_z
    dproj[:, 0, 2] = -k.fx * x * inv_z**2
    dproj[:, 1, 1] = k.fy * inv_z
    dproj[:, 1, 2] = -k.fy * y * inv_z**2

    # d(Xc)/d(dw) = -[Xc]x
    neg_skew = np.zeros((n, 3, 3))
    neg_skew[:, 0, 1] = z
    neg_skew[:, 0, 2] = -y
    neg_skew[:, 1, 0] = -z
    neg_skew[:, 1, 2] = x
    neg_skew[:, 2, 0] = y
    neg_skew[:, 2, 1] = -x

    J = np.empty((n, 2, 6))
    J[:, :, :3] = dproj @ neg_skew
    J[:, :, 3:] = dproj
    return uv, J


def residual_jacobian(k: CameraIntrinsics, pose: Pose, point, depth_epsilon: float = DEPTH_EPSILON) -> np.ndarray:
    """2x6 Jacobian of the pixel reprojection error for one point."""
    _, J = stacked_jacobians(k, pose, np.asarray(point).reshape(1, 3), depth_epsilon)
    return J[0]


__all__ = [
    "DEPTH_EPSILON",
    "project",
    "project_points",
    "residuals",
    "reprojection_errors",
    "residual_jacobian",
    "stacked_jacobians",
]
