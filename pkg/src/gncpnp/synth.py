"""Seeded synthetic scenes with known pose, pixel noise and injected outliers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, Pose, nearest_rotation
from .errors import InvalidConfig
from .metrics import ModelPoints
from .projection import project_points

NOISE_TRUNCATION = 6.0
CENTRAL_FRACTION = 0.6
MAX_POSE_ATTEMPTS = 1000

OUTLIER_MODELS = ("uniform-pixel", "wrong-association")
OUTLIER_TARGETS = ("any", "background")
OUTLIER_PAIRINGS = ("random", "nearest")
POINT_SOURCES = ("uniform-box", "loaded-model")


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)


@dataclass(frozen=True)
class ClusterSpec:
    n_clusters: int
    cluster_radius: float
    background_fraction: float

    def __post_init__(self):
        if self.n_clusters < 1:
            raise InvalidConfig("n_clusters must be >= 1")
        if not self.cluster_radius > 0:
            raise InvalidConfig("cluster_radius must be > 0")
        if not 0.0 <= self.background_fraction < 1.0:
            raise InvalidConfig("background_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class SceneConfig:
    """Recipe for one synthetic scene.

    ``outlier_target="background"`` draws corrupted correspondences only
    from background (non-cluster) points.  ``outlier_pairing="nearest"``
    makes wrong associations swap observations between image-space
    neighbours instead of arbitrary pairs.
    """

    n_points: int = 100
    point_source: str = "uniform-box"
    box_extent: float = 0.2
    model_vertices: tuple | None = None
    depth_range: tuple[float, float] = (0.5, 1.0)
    pixel_noise_sigma: float = 1.0
    outlier_fraction: float = 0.0
    outlier_model: str = "uniform-pixel"
    outlier_target: str = "any"
    outlier_pairing: str = "random"
    cluster_spec: ClusterSpec | None = None
    intrinsics: CameraIntrinsics = field(default_factory=default_intrinsics)
    min_inliers: int = 6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_points < 4:
            raise InvalidConfig("n_points must be >= 4")
        if self.point_source not in POINT_SOURCES:
            raise InvalidConfig(f"point_source must be one of {POINT_SOURCES}")
        if self.point_source == "loaded-model" and not self.model_vertices:
            raise InvalidConfig("point_source 'loaded-model' needs model_vertices")
        if not self.box_extent > 0:
            raise InvalidConfig("box_extent must be > 0")
        z_min, z_max = self.depth_range
        if not 0 < z_min <= z_max:
            raise InvalidConfig("depth_range needs 0 < z_min <= z_max")
        if not self.pixel_noise_sigma >= 0:
            raise InvalidConfig("pixel_noise_sigma must be >= 0")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise InvalidConfig("outlier_fraction must lie in [0, 1)")
        if self.outlier_model not in OUTLIER_MODELS:
            raise InvalidConfig(f"outlier_model must be one of {OUTLIER_MODELS}")
        if self.outlier_target not in OUTLIER_TARGETS:
            raise InvalidConfig(f"outlier_target must be one of {OUTLIER_TARGETS}")
        if self.outlier_pairing not in OUTLIER_PAIRINGS:
            raise InvalidConfig(f"outlier_pairing must be one of {OUTLIER_PAIRINGS}")
        if self.outlier_target == "background" and self.cluster_spec is None:
            raise InvalidConfig("outlier_target 'background' needs a cluster_spec")
        n_out = math.floor(self.outlier_fraction * self.n_points)
        if self.n_points - n_out < max(4, self.min_inliers):
            raise InvalidConfig("too few true inliers would remain after outlier injection")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    intrinsics: CameraIntrinsics
    truth: Pose
    correspondences: CorrespondenceSet
    outlier_truth_mask: np.ndarray
    model_points: ModelPoints
    background_mask: np.ndarray
    outlier_fraction: float
    config: SceneConfig

    @property
    def inlier_truth_mask(self) -> np.ndarray:
        return ~self.outlier_truth_mask

    @property
    def mean_depth(self) -> float:
        return float(np.mean(self.truth.transform(self.correspondences.points)[:, 2]))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation from a normalised Gaussian quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    return nearest_rotation(R)


def _uniform_ball(rng, n, radius):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]


def _sample_points(cfg: SceneConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """3D points and a background flag per point."""
    n = cfg.n_points
    if cfg.point_source == "loaded-model":
        verts = np.asarray(cfg.model_vertices, dtype=np.float64).reshape(-1, 3)
        idx = rng.choice(len(verts), size=n, replace=len(verts) < n)
        return verts[idx], np.ones(n, dtype=bool)
    half = cfg.box_extent / 2.0
    if cfg.cluster_spec is None:
        return rng.uniform(-half, half, size=(n, 3)), np.ones(n, dtype=bool)
    spec = cfg.cluster_spec
    n_bg = int(round(spec.background_fraction * n))
    n_cl = n - n_bg
    inner = max(half - spec.cluster_radius, 0.0)
    centers = rng.uniform(-inner, inner, size=(spec.n_clusters, 3))
    owner = np.arange(n_cl) % spec.n_clusters
    cluster_pts = centers[owner] + _uniform_ball(rng, n_cl, spec.cluster_radius)
    bg_pts = rng.uniform(-half, half, size=(n_bg, 3))
    pts = np.concatenate([cluster_pts, bg_pts])
    background = np.concatenate([np.zeros(n_cl, dtype=bool), np.ones(n_bg, dtype=bool)])
    return pts, background


def _sample_pose(cfg: SceneConfig, points: np.ndarray, rng) -> tuple[Pose, np.ndarray]:
    k = cfg.intrinsics
    centroid = points.mean(axis=0)
    margin = (1.0 - CENTRAL_FRACTION) / 2.0
    for _ in range(MAX_POSE_ATTEMPTS):
        R = random_rotation(rng)
        z = rng.uniform(*cfg.depth_range)
        u = rng.uniform(margin, 1.0 - margin) * k.image_width
        v = rng.uniform(margin, 1.0 - margin) * k.image_height
        target = z * np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
        pose = Pose(R, target - R @ centroid)
        uv, valid = project_points(k, pose, points)
        if not valid.all():
            continue
        inside = (uv[:, 0] >= 0) & (uv[:, 0] < k.image_width) & (uv[:, 1] >= 0) & (uv[:, 1] < k.image_height)
        if inside.all():
            return pose, uv
    raise InvalidConfig("could not place the points fully inside the image; shrink the scene or move it further away")


def _truncated_noise(rng, n: int, sigma: float) -> np.ndarray:
    noise = np.zeros((n, 2))
    if sigma == 0 or n == 0:
        return noise
    todo = np.arange(n)
    while len(todo):
        draw = rng.normal(scale=sigma, size=(len(todo), 2))
        ok = np.linalg.norm(draw, axis=1) <= NOISE_TRUNCATION * sigma
        noise[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return noise


def _pairs(chosen: np.ndarray, observed: np.ndarray, pairing: str, rng) -> list[tuple[int, ...]]:
    """Group corrupted indices into swap pairs, plus one 3-cycle when the count is odd."""
    order = rng.permutation(chosen)
    if pairing == "random":
        groups = [tuple(order[i : i + 2]) for i in range(0, len(order) - 1, 2)]
        leftover = [int(order[-1])] if len(order) % 2 else []
    else:
        free = list(order)
        groups = []
        while len(free) >= 2:
            i = free.pop(0)
            d = np.linalg.norm(observed[free] - observed[i], axis=1)
            j = free.pop(int(np.argmin(d)))
            groups.append((i, j))
        leftover = [int(x) for x in free]
    if leftover:
        if groups:
            groups[-1] = groups[-1] + (leftover[0],)
        else:
            groups.append((leftover[0],))
    return groups


def _inject(pixels, chosen, model, pairing, k, rng, all_indices):
    out = pixels.copy()
    if len(chosen) == 0:
        return out
    if model == "uniform-pixel":
        out[chosen, 0] = rng.uniform(0.0, k.image_width, size=len(chosen))
        out[chosen, 1] = rng.uniform(0.0, k.image_height, size=len(chosen))
        return out
    for group in _pairs(chosen, pixels, pairing, rng):
        if len(group) == 1:
            # a lone wrong association borrows an observation from elsewhere
            others = np.setdiff1d(all_indices, group)
            src = int(rng.choice(others))
            out[group[0]] = pixels[src]
        else:
            g = np.asarray(group)
            out[g] = pixels[np.roll(g, -1)]
    return out


def _candidates(clean: np.ndarray, background: np.ndarray, target: str) -> np.ndarray:
    pool = clean & background if target == "background" else clean
    return np.flatnonzero(pool)


def generate(cfg: SceneConfig) -> SyntheticScene:
    rng = np.random.default_rng(cfg.rng_seed)
    points, background = _sample_points(cfg, rng)
    truth, uv = _sample_pose(cfg, points, rng)
    observed = uv + _truncated_noise(rng, cfg.n_points, cfg.pixel_noise_sigma)

    n_out = math.floor(cfg.outlier_fraction * cfg.n_points)
    pool = _candidates(np.ones(cfg.n_points, dtype=bool), background, cfg.outlier_target)
    if n_out > len(pool):
        raise InvalidConfig(f"{n_out} outliers requested but only {len(pool)} eligible points")
    chosen = np.sort(rng.choice(pool, size=n_out, replace=False)) if n_out else np.zeros(0, dtype=np.int64)
    observed = _inject(observed, chosen, cfg.outlier_model, cfg.outlier_pairing, cfg.intrinsics, rng, np.arange(cfg.n_points))
    mask = np.zeros(cfg.n_points, dtype=bool)
    mask[chosen] = True
    mask.setflags(write=False)
    background.setflags(write=False)

    if cfg.point_source == "loaded-model":
        model = ModelPoints(np.asarray(cfg.model_vertices, dtype=np.float64))
    else:
        model = ModelPoints(points)
    return SyntheticScene(
        intrinsics=cfg.intrinsics,
        truth=truth,
        correspondences=CorrespondenceSet(observed, points),
        outlier_truth_mask=mask,
        model_points=model,
        background_mask=background,
        outlier_fraction=cfg.outlier_fraction,
        config=cfg,
    )


def corrupt(scene: SyntheticScene, additional_fraction: float, rng_seed: int) -> SyntheticScene:
    """Inject extra outliers into clean correspondences.

    The total outlier count becomes floor((f0 + additional) * n) where f0 is
    the scene's nominal outlier fraction, so repeated calls add up exactly.
    """
    if not 0.0 <= additional_fraction < 1.0:
        raise InvalidConfig("additional_fraction must lie in [0, 1)")
    if additional_fraction == 0.0:
        return scene
    cfg = scene.config
    n = len(scene.correspondences)
    total_fraction = scene.outlier_fraction + additional_fraction
    target = math.floor(total_fraction * n)
    current = int(scene.outlier_truth_mask.sum())
    n_new = max(target - current, 0)
    if n - (current + n_new) < max(4, cfg.min_inliers):
        raise InvalidConfig("corruption would leave too few true inliers")
    rng = np.random.default_rng(rng_seed)
    pool = _candidates(~scene.outlier_truth_mask, scene.background_mask, cfg.outlier_target)
    if n_new > len(pool):
        raise InvalidConfig(f"{n_new} new outliers requested but only {len(pool)} eligible points")
    chosen = np.sort(rng.choice(pool, size=n_new, replace=False)) if n_new else np.zeros(0, dtype=np.int64)
    pixels = _inject(
        np.array(scene.correspondences.pixels), chosen, cfg.outlier_model, cfg.outlier_pairing,
        scene.intrinsics, rng, np.arange(n),
    )
    mask = np.array(scene.outlier_truth_mask)
    mask[chosen] = True
    mask.setflags(write=False)
    return replace(
        scene,
        correspondences=scene.correspondences.with_pixels(pixels),
        outlier_truth_mask=mask,
        outlier_fraction=total_fraction,
    )
