"""Shared geometric and configuration value types.

Lengths are meters, image quantities are pixels, reprojection residuals
are squared pixels.  Every type here is an immutable value; arrays are
copied on construction and marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidIntrinsics, InvalidPose, LengthMismatch

ORTHO_TOL = 1e-9


def _frozen(a, shape=None, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.image_width,
            "height": self.image_height,
        }


def validate_intrinsics(k: CameraIntrinsics) -> CameraIntrinsics:
    """Return ``k`` unchanged, or raise InvalidIntrinsics naming the bad field."""
    for name in ("fx", "fy", "cx", "cy"):
        value = getattr(k, name)
        if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
            raise InvalidIntrinsics(name, f"must be a finite number, got {value!r}")
    for name in ("fx", "fy"):
        if getattr(k, name) <= 0:
            raise InvalidIntrinsics(name, f"must be > 0, got {getattr(k, name)!r}")
    for name in ("image_width", "image_height"):
        value = getattr(k, name)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise InvalidIntrinsics(name, f"must be an integer, got {value!r}")
        if value <= 0:
            raise InvalidIntrinsics(name, f"must be > 0, got {value!r}")
    return k


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(omega) -> np.ndarray:
    """Rodrigues formula; series expansion near zero."""
    omega = np.asarray(omega, dtype=np.float64)
    theta2 = float(omega @ omega)
    W = skew(omega)
    if theta2 < 1e-16:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = math.sqrt(theta2)
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    return np.eye(3) + a * W + b * (W @ W)


def nearest_rotation(M) -> np.ndarray:
    """Closest proper rotation in Frobenius norm."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform taking model-frame points to the camera frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidPose("pose contains non-finite entries")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
            raise InvalidPose("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise InvalidPose("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def perturb_left(self, delta) -> "Pose":
        """exp(delta) ∘ self for a 6-vector (axis-angle, translation)."""
        delta = np.asarray(delta, dtype=np.float64)
        dR = so3_exp(delta[:3])
        R = nearest_rotation(dR @ self.rotation)
        return Pose(R, dR @ self.translation + delta[3:])

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "rotation": [float(v) for v in self.rotation.reshape(-1)],
            "translation": [float(v) for v in self.translation],
        }


def pose_from_axis_angle(axis_angle, translation) -> Pose:
    return Pose(nearest_rotation(so3_exp(axis_angle)), translation)


def rotation_geodesic_error(a: Pose, b: Pose) -> float:
    """Angle in radians of the relative rotation between ``a`` and ``b``."""
    c = (np.trace(a.rotation.T @ b.rotation) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def translation_error(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


@dataclass(frozen=True)
class Correspondence:
    pixel: tuple[float, float]
    point: tuple[float, float, float]
    geom_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.geom_weight <= 1.0:
            raise InvalidConfig(f"geom_weight must lie in [0, 1], got {self.geom_weight!r}")


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Paired observations stored column-wise; row i is correspondence i."""

    pixels: np.ndarray
    points: np.ndarray
    geom_weights: np.ndarray = None

    def __post_init__(self):
        px = _frozen(self.pixels).reshape(-1, 2)
        pts = _frozen(self.points).reshape(-1, 3)
        if len(px) != len(pts):
            raise LengthMismatch(f"{len(px)} pixels vs {len(pts)} points")
        if self.geom_weights is None:
            w = _frozen(np.ones(len(px)))
        else:
            w = _frozen(self.geom_weights).reshape(-1)
            if len(w) != len(px):
                raise LengthMismatch(f"{len(w)} weights vs {len(px)} correspondences")
            if np.any(~np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
                raise InvalidConfig("geom_weight entries must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "geom_weights", w)

    @classmethod
    def from_items(cls, items: Sequence[Correspondence]) -> "CorrespondenceSet":
        items = list(items)
        return cls(
            np.array([c.pixel for c in items], dtype=np.float64).reshape(-1, 2),
            np.array([c.point for c in items], dtype=np.float64).reshape(-1, 3),
            np.array([c.geom_weight for c in items], dtype=np.float64),
        )

    @property
    def items(self) -> list[Correspondence]:
        return list(self)

    def __len__(self) -> int:
        return len(self.pixels)

    def __getitem__(self, i: int) -> Correspondence:
        return Correspondence(
            tuple(float(v) for v in self.pixels[i]),
            tuple(float(v) for v in self.points[i]),
            float(self.geom_weights[i]),
        )

    def __iter__(self) -> Iterator[Correspondence]:
        for i in range(len(self)):
            yield self[i]

    def with_weights(self, weights) -> "CorrespondenceSet":
        return CorrespondenceSet(self.pixels, self.points, weights)

    def with_pixels(self, pixels) -> "CorrespondenceSet":
        return CorrespondenceSet(pixels, self.points, self.geom_weights)


@dataclass(frozen=True)
class GncConfig:
    """Hyperparameters of the graduated non-convexity loop.

    ``mu_final`` and ``epsilon`` are in squared pixels, like the residuals.
    ``tau_gnc`` is small because the score compares squared residuals against
    mu squared: at mu_final = 0.5 a threshold of 1e-3 keeps correspondences
    whose pixel error is below about 4 px.
    """

    kappa: float = 5.0
    epsilon: float = 1e-6
    gamma: float = 0.5
    mu_final: float = 0.5
    tau_gnc: float = 1e-3
    tau_geom: float = 0.1
    min_inliers: int = 6
    max_iterations: int = 100
    inner_max_iter: int = 50
    inner_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidConfig(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if not self.mu_final > 0.0:
            raise InvalidConfig(f"mu_final must be > 0, got {self.mu_final!r}")
        if not self.kappa > 0.0:
            raise InvalidConfig(f"kappa must be > 0, got {self.kappa!r}")
        if not self.epsilon >= 0.0:
            raise InvalidConfig(f"epsilon must be >= 0, got {self.epsilon!r}")
        if not 0.0 < self.tau_gnc < 1.0:
            raise InvalidConfig(f"tau_gnc must lie in (0, 1), got {self.tau_gnc!r}")
        if not 0.0 <= self.tau_geom < 1.0:
            raise InvalidConfig(f"tau_geom must lie in [0, 1), got {self.tau_geom!r}")
        if self.min_inliers < 4:
            raise InvalidConfig(f"min_inliers must be >= 4, got {self.min_inliers!r}")
        # zero outer iterations is allowed: it reduces the pipeline to RANSAC
        if self.max_iterations < 0:
            raise InvalidConfig(f"max_iterations must be >= 0, got {self.max_iterations!r}")


@dataclass(frozen=True)
class GncIterationRecord:
    mu: float
    inlier_indices: tuple[int, ...]
    pose: Pose
    mean_residual: float
    median_residual: float

    @property
    def inlier_count(self) -> int:
        return len(self.inlier_indices)


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    pose: Pose
    inlier_mask: np.ndarray
    trace: tuple[GncIterationRecord, ...] = field(default_factory=tuple)
    converged: bool = False
    initial_pose: Pose | None = None
    final_cost: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "inlier_mask", _frozen(self.inlier_mask, dtype=bool).reshape(-1))
        object.__setattr__(self, "trace", tuple(self.trace))
        mus = [rec.mu for rec in self.trace]
        if any(b > a for a, b in zip(mus, mus[1:])):
            raise InvalidConfig("trace mu values must be non-increasing")
