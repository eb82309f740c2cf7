"""Voxel-support confidence weights for the 3D side of a correspondence set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidConfig


@dataclass(frozen=True)
class VoxelGridConfig:
    voxel_size: float = 0.005
    w_min: float = 0.2

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise InvalidConfig(f"voxel_size must be > 0, got {self.voxel_size!r}")
        if not 0.0 <= self.w_min < 1.0:
            raise InvalidConfig(f"w_min must lie in [0, 1), got {self.w_min!r}")


@dataclass(frozen=True, eq=False)
class GeometryWeights:
    support: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.weight)


def voxel_index(point, voxel_size: float) -> np.ndarray:
    """Integer grid cell of ``point``; floors toward -inf, grid anchored at the origin."""
    if not voxel_size > 0:
        raise InvalidConfig(f"voxel_size must be > 0, got {voxel_size!r}")
    return np.floor(np.asarray(point, dtype=np.float64) / voxel_size).astype(np.int64)


def voxel_support(points, voxel_size: float) -> np.ndarray:
    """Number of points sharing each point's voxel, the point itself included."""
    cells = voxel_index(np.asarray(points, dtype=np.float64).reshape(-1, 3), voxel_size)
    _, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    return counts[inverse.reshape(-1)]


def compute_weights(points, cfg: VoxelGridConfig = VoxelGridConfig()) -> GeometryWeights:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInput("no points to weight")
    support = voxel_support(pts, cfg.voxel_size)
    normalized = support / support.max()
    weight = cfg.w_min + (1.0 - cfg.w_min) * normalized
    # the densest voxel gets exactly 1 regardless of rounding
    weight[support == support.max()] = 1.0
    support.setflags(write=False)
    weight.setflags(write=False)
    return GeometryWeights(support, weight)
