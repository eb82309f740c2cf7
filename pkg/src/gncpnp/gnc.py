"""Outer graduated non-convexity loop around the PnP solvers.

One iteration selects the correspondences whose soft inlier score and
geometry weight both clear their thresholds, re-solves the pose on that
subset, recomputes residuals and anneals mu.  The pass at mu == mu_final
still runs before the loop exits, and a final LM refinement polishes the
pose on the last selected subset.
"""

from __future__ import annotations

import logging

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, GncConfig, GncIterationRecord, PoseEstimate
from .errors import (
    InitializationFailed,
    LengthMismatch,
    NoFiniteResiduals,
    NumericalFailure,
    TooFewCorrespondences,
)
from .pnp import RansacConfig, iterative_pnp, ransac_pnp, refine_lm, subset_cost
from .projection import residuals
from .robust_loss import anneal_mu, gnc_score, initial_mu, median

log = logging.getLogger(__name__)


def select_inliers(residuals, geom_weights, mu: float, tau_gnc: float, tau_geom: float) -> np.ndarray:
    """Indices with gnc_score > tau_gnc and geometry weight > tau_geom (both strict)."""
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    w = np.asarray(geom_weights, dtype=np.float64).reshape(-1)
    if len(r) != len(w):
        raise LengthMismatch(f"{len(r)} residuals vs {len(w)} geometry weights")
    if len(r) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero((gnc_score(r, mu) > tau_gnc) & (w > tau_geom))


def _mask(n: int, indices) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[np.asarray(indices, dtype=np.int64)] = True
    return m


def gnc_pnp(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    geom_weights=None,
    cfg: GncConfig = GncConfig(),
    ransac_cfg: RansacConfig = RansacConfig(),
) -> PoseEstimate:
    """Robust pose from 2D-3D correspondences.

    ``geom_weights`` defaults to the weights stored on ``c``.  If the first
    selection is already too small the RANSAC pose and consensus mask are
    returned with ``converged=False``.
    """
    n = len(c)
    if n < cfg.min_inliers:
        raise TooFewCorrespondences(f"need at least {cfg.min_inliers} correspondences, got {n}")
    w_geom = c.geom_weights if geom_weights is None else np.asarray(geom_weights, dtype=np.float64)
    if len(w_geom) != n:
        raise LengthMismatch(f"{len(w_geom)} geometry weights vs {n} correspondences")

    try:
        init = ransac_pnp(k, c, ransac_cfg)
    except NumericalFailure as exc:
        raise InitializationFailed(str(exc)) from exc

    pose = init.pose
    r = residuals(k, pose, c)
    if not np.any(np.isfinite(r)):
        raise NoFiniteResiduals("every correspondence is behind the camera at the RANSAC pose")
    # mu never starts below its floor, so the trace stays non-increasing
    mu = max(initial_mu(r, cfg.kappa, cfg.epsilon), cfg.mu_final)

    trace: list[GncIterationRecord] = []
    selected = None
    converged = False
    for _ in range(cfg.max_iterations):
        candidate = select_inliers(r, w_geom, mu, cfg.tau_gnc, cfg.tau_geom)
        if len(candidate) < cfg.min_inliers:
            log.debug("selection of %d < min_inliers at mu=%g", len(candidate), mu)
            break
        selected = candidate
        pose = iterative_pnp(k, c, selected, pose, cfg.inner_max_iter, cfg.inner_tol).pose
        r = residuals(k, pose, c)
        sel_r = r[selected]
        trace.append(
            GncIterationRecord(
                mu=mu,
                inlier_indices=tuple(int(i) for i in selected),
                pose=pose,
                mean_residual=float(np.mean(sel_r)),
                median_residual=median(sel_r),
            )
        )
        if mu <= cfg.mu_final:
            converged = True
            break
        mu = anneal_mu(mu, cfg.gamma, cfg.mu_final)

    if selected is None:
        return PoseEstimate(
            pose=init.pose,
            inlier_mask=init.inlier_mask,
            trace=(),
            converged=False,
            initial_pose=init.pose,
            final_cost=init.final_cost,
        )

    final = refine_lm(k, c, selected, pose)
    return PoseEstimate(
        pose=final.pose,
        inlier_mask=_mask(n, selected),
        trace=trace,
        converged=converged,
        initial_pose=init.pose,
        final_cost=final.final_cost,
    )


def gnc_pnp_unweighted(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    cfg: GncConfig = GncConfig(),
    ransac_cfg: RansacConfig = RansacConfig(),
) -> PoseEstimate:
    """Same loop with every geometry weight forced to 1."""
    return gnc_pnp(k, c, np.ones(len(c)), cfg, ransac_cfg)


def ransac_then_lm(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    ransac_cfg: RansacConfig = RansacConfig(),
) -> PoseEstimate:
    """RANSAC followed directly by LM on its consensus set, with no annealing."""
    init = ransac_pnp(k, c, ransac_cfg)
    subset = np.flatnonzero(init.inlier_mask)
    final = refine_lm(k, c, subset, init.pose)
    return PoseEstimate(
        pose=final.pose,
        inlier_mask=init.inlier_mask,
        trace=(),
        converged=True,
        initial_pose=init.pose,
        final_cost=final.final_cost,
    )


def ransac_only(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    ransac_cfg: RansacConfig = RansacConfig(),
) -> PoseEstimate:
    init = ransac_pnp(k, c, ransac_cfg)
    return PoseEstimate(
        pose=init.pose,
        inlier_mask=init.inlier_mask,
        trace=(),
        converged=True,
        initial_pose=init.pose,
        final_cost=subset_cost(k, init.pose, c, np.flatnonzero(init.inlier_mask)),
    )
