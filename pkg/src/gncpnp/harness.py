"""Seeded experiment runner for the four ablation arms, with CSV output.

Every random draw flows from ``base_seed + trial_index`` so repeated runs
of the same spec write byte-identical CSV files.  Wall time is only
written when explicitly requested since it is the one non-deterministic
quantity.
"""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, GncConfig, Pose, PoseEstimate, rotation_geodesic_error, translation_error
from .errors import PoseError
from .geom_weight import VoxelGridConfig, compute_weights
from .gnc import gnc_pnp, gnc_pnp_unweighted, ransac_only, ransac_then_lm
from .io import load_correspondences, load_model_points, load_truth
from .metrics import AUC_MAX_THRESHOLD, ModelPoints, add, add_s, auc
from .pnp import RansacConfig
from .synth import SceneConfig, generate

log = logging.getLogger(__name__)

MODES = ("full", "no-geom-weights", "no-gnc", "ransac-only")

TRIAL_COLUMNS = [
    "trial_index",
    "seed",
    "status",
    "rotation_error_deg",
    "translation_error_m",
    "add_m",
    "add_s_m",
    "inlier_precision",
    "inlier_recall",
    "converged",
    "n_inliers",
    "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22",
    "tx", "ty", "tz",
    "error",
]

SUMMARY_METRICS = [
    "rotation_error_deg",
    "translation_error_m",
    "add_m",
    "add_s_m",
    "inlier_precision",
    "inlier_recall",
]

SUMMARY_COLUMNS = (
    ["mode", "outlier_fraction", "trials", "failures", "converged_rate"]
    + [f"{stat}_{m}" for m in SUMMARY_METRICS for stat in ("mean", "median")]
    + [
        "add_auc_0.1d_pct",
        "add_s_auc_0.1d_pct",
        "add_below_0.1d_pct",
        "add_s_below_0.1d_pct",
        "add_auc_10cm_pct",
        "add_s_auc_10cm_pct",
    ]
)


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str = "full"
    scene: SceneConfig | None = field(default_factory=SceneConfig)
    input_paths: tuple[str, ...] = ()
    model_path: str | None = None
    trials: int = 1
    base_seed: int = 0
    output_path: str | None = None
    gnc: GncConfig = field(default_factory=GncConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    voxel: VoxelGridConfig = field(default_factory=VoxelGridConfig)
    use_file_weights: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.scene is None and not self.input_paths:
            raise ValueError("either a scene config or input files are required")


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    status: str = "ok"
    rotation_error_deg: float = math.nan
    translation_error_m: float = math.nan
    add_m: float = math.nan
    add_s_m: float = math.nan
    inlier_precision: float = math.nan
    inlier_recall: float = math.nan
    converged: bool = False
    n_inliers: int = 0
    pose: Pose | None = None
    diameter: float = math.nan
    wall_time_ms: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self, timing: bool = False) -> dict:
        out = {
            "trial_index": self.trial_index,
            "seed": self.seed,
            "status": self.status,
            "converged": int(self.converged),
            "n_inliers": self.n_inliers,
            "error": self.error,
        }
        for name in SUMMARY_METRICS:
            out[name] = _fmt(getattr(self, name))
        R = self.pose.rotation.reshape(-1) if self.pose is not None else [math.nan] * 9
        t = self.pose.translation if self.pose is not None else [math.nan] * 3
        for i, v in enumerate(R):
            out[f"r{i // 3}{i % 3}"] = _fmt(v)
        for name, v in zip(("tx", "ty", "tz"), t):
            out[name] = _fmt(v)
        if timing:
            out["wall_time_ms"] = _fmt(self.wall_time_ms)
        return out


def _fmt(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def solve(mode: str, k: CameraIntrinsics, c: CorrespondenceSet, spec: ExperimentSpec, seed: int) -> PoseEstimate:
    """Run one ablation arm."""
    ransac_cfg = replace(spec.ransac, rng_seed=seed)
    if mode == "full":
        weights = c.geom_weights if spec.use_file_weights else compute_weights(c.points, spec.voxel).weight
        return gnc_pnp(k, c, weights, spec.gnc, ransac_cfg)
    if mode == "no-geom-weights":
        return gnc_pnp_unweighted(k, c, spec.gnc, ransac_cfg)
    if mode == "no-gnc":
        return ransac_then_lm(k, c, ransac_cfg)
    if mode == "ransac-only":
        return ransac_only(k, c, ransac_cfg)
    raise ValueError(f"unknown mode {mode!r}")


def _load_trial(spec: ExperimentSpec, i: int, seed: int):
    """(intrinsics, correspondences, truth, outlier mask or None, model or None)."""
    if spec.input_paths:
        path = spec.input_paths[i % len(spec.input_paths)]
        k, c = load_correspondences(path)
        truth = load_truth(path)
        model = load_model_points(spec.model_path) if spec.model_path else None
        if truth is None:
            return k, c, None, None, model
        if model is None:
            model = ModelPoints(c.points)
        return k, c, truth[0], truth[1], model
    scene = generate(replace(spec.scene, rng_seed=seed))
    return scene.intrinsics, scene.correspondences, scene.truth, scene.outlier_truth_mask, scene.model_points


def run_trial(spec: ExperimentSpec, i: int, mode: str | None = None) -> TrialResult:
    seed = spec.base_seed + i
    result = TrialResult(trial_index=i, seed=seed)
    mode = mode or spec.mode
    try:
        k, c, truth, outliers, model = _load_trial(spec, i, seed)
        start = time.perf_counter()
        est = solve(mode, k, c, spec, seed)
        result.wall_time_ms = (time.perf_counter() - start) * 1e3
    except PoseError as exc:
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        log.info("trial %d failed: %s", i, result.error)
        return result
    result.pose = est.pose
    result.converged = bool(est.converged)
    result.n_inliers = int(est.inlier_mask.sum())
    if truth is not None:
        result.rotation_error_deg = math.degrees(rotation_geodesic_error(est.pose, truth))
        result.translation_error_m = translation_error(est.pose, truth)
        result.add_m = add(model, est.pose, truth)
        result.add_s_m = add_s(model, est.pose, truth)
        result.diameter = model.diameter
        if outliers is not None:
            inl = ~np.asarray(outliers, dtype=bool)
            pred = est.inlier_mask
            tp = int(np.count_nonzero(pred & inl))
            result.inlier_precision = tp / int(pred.sum()) if pred.any() else 0.0
            result.inlier_recall = tp / int(inl.sum()) if inl.any() else 0.0
    return result


def summarize(results: Sequence[TrialResult], mode: str, outlier_fraction: float) -> dict:
    ok = [r for r in results if r.ok]
    row = {
        "mode": mode,
        "outlier_fraction": _fmt(outlier_fraction),
        "trials": len(results),
        "failures": len(results) - len(ok),
        "converged_rate": _fmt(sum(r.converged for r in results) / len(results)),
    }
    for name in SUMMARY_METRICS:
        vals = np.array([getattr(r, name) for r in ok], dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        row[f"mean_{name}"] = _fmt(np.mean(vals)) if len(vals) else ""
        row[f"median_{name}"] = _fmt(np.median(vals)) if len(vals) else ""

    with_truth = [r for r in results if not r.ok or not math.isnan(r.add_m)]
    if with_truth and any(r.ok for r in with_truth):
        # failed trials count as infinite error
        add_e = np.array([r.add_m if r.ok else math.inf for r in with_truth])
        adds_e = np.array([r.add_s_m if r.ok else math.inf for r in with_truth])
        diam = np.array([r.diameter if r.ok else 1.0 for r in with_truth])
        rel = 0.1 * diam
        row["add_auc_0.1d_pct"] = _fmt(100.0 * auc(add_e / rel, 1.0))
        row["add_s_auc_0.1d_pct"] = _fmt(100.0 * auc(adds_e / rel, 1.0))
        row["add_below_0.1d_pct"] = _fmt(100.0 * float(np.mean(add_e < rel)))
        row["add_s_below_0.1d_pct"] = _fmt(100.0 * float(np.mean(adds_e < rel)))
        row["add_auc_10cm_pct"] = _fmt(100.0 * auc(add_e, AUC_MAX_THRESHOLD))
        row["add_s_auc_10cm_pct"] = _fmt(100.0 * auc(adds_e, AUC_MAX_THRESHOLD))
    else:
        for col in SUMMARY_COLUMNS[-6:]:
            row[col] = ""
    return row


def success_rate(summary: dict) -> float:
    v = summary.get("add_below_0.1d_pct", "")
    return float(v) / 100.0 if v != "" else math.nan


def _outlier_fraction(spec: ExperimentSpec) -> float:
    return spec.scene.outlier_fraction if spec.scene is not None and not spec.input_paths else math.nan


def summary_path(output_path) -> Path:
    p = Path(output_path)
    return p.with_name(p.stem + "_summary" + (p.suffix or ".csv"))


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def trial_columns(timing: bool = False) -> list[str]:
    return TRIAL_COLUMNS + (["wall_time_ms"] if timing else [])


def run_experiment(spec: ExperimentSpec) -> tuple[list[TrialResult], dict]:
    """All trials of one arm; writes ``output_path`` and its ``_summary`` sibling when set."""
    results = [run_trial(spec, i) for i in range(spec.trials)]
    results.sort(key=lambda r: r.trial_index)
    summary = summarize(results, spec.mode, _outlier_fraction(spec))
    if spec.output_path:
        write_csv(spec.output_path, trial_columns(spec.timing), [r.row(spec.timing) for r in results])
        write_csv(summary_path(spec.output_path), SUMMARY_COLUMNS, [summary])
    return results, summary


def emit_sweep(spec: ExperimentSpec, fractions: Sequence[float], modes: Sequence[str] | None = None, output_path=None) -> list[dict]:
    """One summary row per (mode, outlier_fraction) cell, modes outermost."""
    if not fractions:
        raise ValueError("outlier fraction grid is empty")
    if spec.scene is None:
        raise ValueError("sweeps need a synthetic scene config")
    modes = list(modes) if modes else [spec.mode]
    rows = []
    for mode in modes:
        rates = []
        for frac in fractions:
            cell = replace(spec, mode=mode, scene=replace(spec.scene, outlier_fraction=frac), output_path=None)
            _, summary = run_experiment(cell)
            rows.append(summary)
            rates.append(success_rate(summary))
        if mode == "full":
            for (f0, a), (f1, b) in zip(zip(fractions, rates), zip(fractions[1:], rates[1:])):
                if f1 > f0 and b > a:
                    warnings.warn(
                        f"success rate rose from {a:.3f} to {b:.3f} between outlier fractions {f0} and {f1}",
                        RuntimeWarning,
                        stacklevel=2,
                    )
    if output_path:
        write_csv(output_path, SUMMARY_COLUMNS, rows)
    return rows
