"""Robust PnP with graduated non-convexity and voxel geometry weights."""

from .core import (
    CameraIntrinsics,
    Correspondence,
    CorrespondenceSet,
    GncConfig,
    GncIterationRecord,
    Pose,
    PoseEstimate,
)
from .errors import PoseError
from .geom_weight import GeometryWeights, VoxelGridConfig, compute_weights
from .gnc import gnc_pnp, gnc_pnp_unweighted, ransac_only, ransac_then_lm, select_inliers
from .harness import ExperimentSpec, TrialResult, emit_sweep, run_experiment
from .io import load_correspondences, load_model_points, save_correspondences
from .metrics import ModelPoints, add, add_s, auc
from .pnp import RansacConfig, iterative_pnp, ransac_pnp, refine_lm
from .synth import ClusterSpec, SceneConfig, SyntheticScene, generate

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "ClusterSpec",
    "Correspondence",
    "CorrespondenceSet",
    "ExperimentSpec",
    "GeometryWeights",
    "GncConfig",
    "GncIterationRecord",
    "ModelPoints",
    "Pose",
    "PoseError",
    "PoseEstimate",
    "RansacConfig",
    "SceneConfig",
    "SyntheticScene",
    "TrialResult",
    "VoxelGridConfig",
    "add",
    "add_s",
    "auc",
    "compute_weights",
    "emit_sweep",
    "generate",
    "gnc_pnp",
    "gnc_pnp_unweighted",
    "iterative_pnp",
    "load_correspondences",
    "load_model_points",
    "ransac_only",
    "ransac_pnp",
    "ransac_then_lm",
    "refine_lm",
    "run_experiment",
    "save_correspondences",
    "select_inliers",
]
