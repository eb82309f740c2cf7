"""Pose solvers: minimal-sample RANSAC initialisation, damped Gauss-Newton and Levenberg-Marquardt.

All inner solves minimise the unweighted sum of squared pixel errors over
an index subset.  Steps are only accepted when the cost strictly drops, so
the returned cost never exceeds the starting cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, Pose, nearest_rotation
from .errors import BehindCamera, InvalidConfig, NoConsensus, NumericalFailure, TooFewCorrespondences
from .projection import residuals, stacked_jacobians

MIN_SUBSET = 4
DLT_SAMPLE = 6
P3P_SAMPLE = 4
SOLVERS = {"p3p": P3P_SAMPLE, "dlt": DLT_SAMPLE}
# per-point squared pixel error below which a fit counts as exact
EXACT_COST = 1e-24


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 1000
    inlier_threshold: float = 8.0  # unsquared pixels
    solver: str = "p3p"
    sample_size: int | None = None
    confidence: float = 0.99
    rng_seed: int = 0
    batch_size: int = 64

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfig("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise InvalidConfig("inlier_threshold must be > 0")
        if self.solver not in SOLVERS:
            raise InvalidConfig(f"solver must be one of {sorted(SOLVERS)}")
        if self.sample_size is None:
            object.__setattr__(self, "sample_size", SOLVERS[self.solver])
        if self.sample_size < SOLVERS[self.solver]:
            raise InvalidConfig(f"sample_size must be >= {SOLVERS[self.solver]} for the {self.solver} solver")
        if not 0.0 < self.confidence < 1.0:
            raise InvalidConfig("confidence must lie in (0, 1)")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")


@dataclass(frozen=True, eq=False)
class SolveReport:
    pose: Pose
    iterations_used: int
    final_cost: float
    initial_cost: float = float("nan")
    inlier_mask: np.ndarray | None = None


def subset_cost(k: CameraIntrinsics, pose: Pose, c: CorrespondenceSet, subset: np.ndarray) -> float:
    """Sum of squared pixel errors over ``subset``; inf if any point is behind the camera."""
    r = residuals(k, pose, c)[subset]
    return float(np.sum(r))


def _normalized_image_points(k: CameraIntrinsics, pixels: np.ndarray) -> np.ndarray:
    return np.stack([(pixels[:, 0] - k.cx) / k.fx, (pixels[:, 1] - k.cy) / k.fy], axis=1)


def _similarity_normalizer(pts: np.ndarray) -> np.ndarray:
    """Homogeneous transform centering ``pts`` with mean distance sqrt(dim)."""
    dim = pts.shape[-1]
    centroid = pts.mean(axis=-2, keepdims=True)
    dist = np.linalg.norm(pts - centroid, axis=-1).mean(axis=-1)
    scale = np.sqrt(dim) / np.maximum(dist, 1e-300)
    T = np.zeros(pts.shape[:-2] + (dim + 1, dim + 1))
    idx = np.arange(dim)
    T[..., idx, idx] = scale[..., None]
    T[..., :dim, dim] = -scale[..., None] * centroid[..., 0, :]
    T[..., dim, dim] = 1.0
    return T


def dlt_batch(xn: np.ndarray, X: np.ndarray):
    """Solve the 3x4 DLT for a batch of samples.

    ``xn`` is (B, n, 2) normalised image points, ``X`` is (B, n, 3).
    Returns rotations (B, 3, 3), translations (B, 3) and a validity flag.
    """
    B, n, _ = X.shape
    T2 = _similarity_normalizer(xn)
    T3 = _similarity_normalizer(X)
    xh = np.einsum("bij,bnj->bni", T2, np.concatenate([xn, np.ones((B, n, 1))], axis=2))
    Xh = np.einsum("bij,bnj->bni", T3, np.concatenate([X, np.ones((B, n, 1))], axis=2))
    u = xh[..., 0:1]
    v = xh[..., 1:2]
    zeros = np.zeros_like(Xh)
    rows_u = np.concatenate([Xh, zeros, -u * Xh], axis=2)
    rows_v = np.concatenate([zeros, Xh, -v * Xh], axis=2)
    A = np.concatenate([rows_u, rows_v], axis=1)
    _, S, Vt = np.linalg.svd(A)
    P_n = Vt[:, -1, :].reshape(B, 3, 4)
    P = np.linalg.inv(T2) @ P_n @ T3

    M = P[:, :, :3]
    det = np.linalg.det(M)
    sign = np.where(det < 0, -1.0, 1.0)
    P = P * sign[:, None, None]
    M = P[:, :, :3]
    U, Sm, Vmt = np.linalg.svd(M)
    R = U @ Vmt
    scale = Sm.mean(axis=1)
    valid = (
        np.isfinite(scale)
        & (scale > 0)
        & (np.abs(det) > 0)
        & (np.linalg.det(R) > 0)
        & (S[:, -2] > 1e-12 * np.maximum(S[:, 0], 1e-300))
    )
    t = P[:, :, 3] / np.where(scale > 0, scale, 1.0)[:, None]
    return R, t, valid


def p3p_batch(bearings: np.ndarray, points: np.ndarray):
    """Grunert's three-point solution for a batch of triplets.

    ``bearings`` (B, 3, 3) holds unit camera rays as rows, ``points`` (B, 3, 3)
    the matching model points.  Returns up to four candidates per triplet:
    rotations (B, 4, 3, 3), translations (B, 4, 3) and a validity mask (B, 4).
    """
    f, P = bearings, points
    B = len(f)
    a2 = np.sum((P[:, 1] - P[:, 2]) ** 2, -1)
    b2 = np.sum((P[:, 0] - P[:, 2]) ** 2, -1)
    c2 = np.sum((P[:, 0] - P[:, 1]) ** 2, -1)
    ca = np.sum(f[:, 1] * f[:, 2], -1)
    cb = np.sum(f[:, 0] * f[:, 2], -1)
    cg = np.sum(f[:, 0] * f[:, 1], -1)
    amc = (a2 - c2) / b2
    apc = (a2 + c2) / b2
    A4 = (amc - 1) ** 2 - 4 * c2 / b2 * ca**2
    A3 = 4 * (amc * (1 - amc) * cb - (1 - apc) * ca * cg + 2 * c2 / b2 * ca**2 * cb)
    A2 = 2 * (
        amc**2 - 1 + 2 * amc**2 * cb**2 + 2 * (b2 - c2) / b2 * ca**2
        - 4 * apc * ca * cb * cg + 2 * (b2 - a2) / b2 * cg**2
    )
    A1 = 4 * (-amc * (1 + amc) * cb + 2 * a2 / b2 * cg**2 * cb - (1 - apc) * ca * cg)
    A0 = (1 + amc) ** 2 - 4 * a2 / b2 * cg**2

    # quartic in v = s3 / s1 via companion-matrix eigenvalues
    C = np.zeros((B, 4, 4))
    C[:, 1:, :3] = np.eye(3)
    C[:, :, 3] = -np.stack([A0, A1, A2, A3], axis=1) / A4[:, None]
    C[~np.isfinite(C)] = 0.0
    roots = np.linalg.eigvals(C)
    v = roots.real
    ok = np.abs(roots.imag) <= 1e-4 * (1.0 + np.abs(v))
    u = ((amc - 1)[:, None] * v**2 - 2 * (amc * cb)[:, None] * v + (1 + amc)[:, None]) / (
        2 * (cg[:, None] - v * ca[:, None])
    )
    s1sq = b2[:, None] / (1 + v**2 - 2 * v * cb[:, None])
    ok &= np.isfinite(u) & np.isfinite(s1sq) & (s1sq > 0) & (u > 0) & (v > 0)
    s1 = np.sqrt(np.abs(s1sq))
    depths = np.stack([s1, u * s1, v * s1], axis=-1)

    cam = depths[..., None] * f[:, None, :, :]
    world = np.broadcast_to(P[:, None], cam.shape)
    R, t = _kabsch(world, cam)
    ok &= np.all(np.isfinite(R), axis=(-2, -1)) & np.all(np.isfinite(t), axis=-1)
    return R, t, ok


def _kabsch(src: np.ndarray, dst: np.ndarray):
    """Batched rigid fit dst ~ R src + t over the second-to-last axis."""
    ms = src.mean(axis=-2, keepdims=True)
    md = dst.mean(axis=-2, keepdims=True)
    H = np.einsum("...ni,...nj->...ij", src - ms, dst - md)
    H[~np.isfinite(H)] = 0.0
    U, _, Vt = np.linalg.svd(H)
    V = np.swapaxes(Vt, -1, -2)
    Ut = np.swapaxes(U, -1, -2)
    d = np.sign(np.linalg.det(V @ Ut))
    d[d == 0] = 1.0
    D = np.ones(H.shape[:-1])
    D[..., 2] = d
    R = V @ (D[..., None] * Ut)
    t = md[..., 0, :] - np.einsum("...ij,...j->...i", R, ms[..., 0, :])
    return R, t


def _p3p_hypotheses(xn: np.ndarray, X: np.ndarray):
    """One pose per 4-point sample: P3P on the first three, the fourth picks the root."""
    B = len(X)
    rays = np.concatenate([xn[:, :3], np.ones((B, 3, 1))], axis=2)
    rays /= np.linalg.norm(rays, axis=2, keepdims=True)
    R, t, ok = p3p_batch(rays, X[:, :3])
    check = np.einsum("bkij,bj->bki", R, X[:, 3]) + t
    z = check[..., 2]
    proj = check[..., :2] / np.where(z > 0, z, 1.0)[..., None]
    err = np.sum((proj - xn[:, None, 3]) ** 2, axis=-1)
    err = np.where(ok & (z > 0), err, np.inf)
    best = np.argmin(err, axis=1)
    rows = np.arange(B)
    return R[rows, best], t[rows, best], np.isfinite(err[rows, best])


def dlt_pose(k: CameraIntrinsics, c: CorrespondenceSet, subset=None) -> Pose:
    """Linear pose from >= 6 correspondences."""
    idx = np.arange(len(c)) if subset is None else np.asarray(subset)
    if len(idx) < DLT_SAMPLE:
        raise TooFewCorrespondences(f"DLT needs {DLT_SAMPLE} correspondences, got {len(idx)}")
    xn = _normalized_image_points(k, c.pixels[idx])
    R, t, valid = dlt_batch(xn[None], c.points[idx][None])
    if not valid[0]:
        raise NumericalFailure("degenerate DLT configuration")
    return Pose(nearest_rotation(R[0]), t[0])


def _score_batch(k, R, t, points, pixels, threshold):
    Xc = np.einsum("bij,nj->bni", R, points) + t[:, None, :]
    z = Xc[..., 2]
    front = z > 1e-6
    zs = np.where(front, z, 1.0)
    du = k.fx * Xc[..., 0] / zs + k.cx - pixels[None, :, 0]
    dv = k.fy * Xc[..., 1] / zs + k.cy - pixels[None, :, 1]
    return front & (du * du + dv * dv < threshold * threshold)


def _required_iterations(inlier_ratio: float, sample_size: int, confidence: float, cap: int) -> int:
    p_good = inlier_ratio**sample_size
    if p_good <= 0.0:
        return cap
    if p_good >= 1.0:
        return 1
    n = math.log(1.0 - confidence) / math.log(1.0 - p_good)
    return min(cap, max(1, math.ceil(n)))


def ransac_pnp(k: CameraIntrinsics, c: CorrespondenceSet, cfg: RansacConfig = RansacConfig()) -> SolveReport:
    """Consensus-maximising pose from random minimal DLT samples, refit on the consensus set."""
    n = len(c)
    if n < cfg.sample_size:
        raise TooFewCorrespondences(f"need at least {cfg.sample_size} correspondences, got {n}")
    finite = np.all(np.isfinite(c.pixels), axis=1) & np.all(np.isfinite(c.points), axis=1)
    if finite.sum() < cfg.sample_size:
        raise TooFewCorrespondences("too few correspondences with finite coordinates")
    candidates = np.flatnonzero(finite)

    rng = np.random.default_rng(cfg.rng_seed)
    xn_all = _normalized_image_points(k, c.pixels)
    best_mask = None
    best_count = -1
    best_pose = None
    needed = cfg.max_iterations
    done = 0
    while done < needed:
        batch = min(cfg.batch_size, needed - done)
        keys = rng.random((batch, len(candidates)))
        samples = candidates[np.argpartition(keys, cfg.sample_size - 1, axis=1)[:, : cfg.sample_size]]
        with np.errstate(all="ignore"):
            if cfg.solver == "p3p":
                R, t, valid = _p3p_hypotheses(xn_all[samples], c.points[samples])
            else:
                R, t, valid = dlt_batch(xn_all[samples], c.points[samples])
            masks = _score_batch(k, R, t, c.points, c.pixels, cfg.inlier_threshold)
        counts = np.where(valid, masks.sum(axis=1), -1)
        for b in range(batch):
            if counts[b] > best_count:
                best_count = int(counts[b])
                best_mask = masks[b]
                best_pose = (R[b], t[b])
        done += batch
        if best_count > 0:
            needed = _required_iterations(best_count / n, cfg.sample_size, cfg.confidence, cfg.max_iterations)

    if best_pose is None or best_count < cfg.sample_size:
        raise NoConsensus(f"best hypothesis has {max(best_count, 0)} inliers < {cfg.sample_size}")

    pose = Pose(nearest_rotation(best_pose[0]), best_pose[1])
    mask = best_mask
    if mask.sum() < MIN_SUBSET:
        raise NoConsensus("consensus set too small to refit")
    iterations = done
    # refit on the consensus set until it stops changing
    for _ in range(5):
        report = iterative_pnp(k, c, np.flatnonzero(mask), pose)
        pose = report.pose
        new_mask = _score_batch(
            k, pose.rotation[None], pose.translation[None], c.points, c.pixels, cfg.inlier_threshold
        )[0]
        if new_mask.sum() < cfg.sample_size:
            break
        if np.array_equal(new_mask, mask):
            break
        mask = new_mask
    mask = _score_batch(k, pose.rotation[None], pose.translation[None], c.points, c.pixels, cfg.inlier_threshold)[0]
    cost = subset_cost(k, pose, c, np.flatnonzero(mask))
    mask.setflags(write=False)
    return SolveReport(pose, iterations, cost, float("nan"), mask)


def _check_subset(c: CorrespondenceSet, subset) -> np.ndarray:
    idx = np.unique(np.asarray(subset, dtype=np.int64).reshape(-1))
    if len(idx) < MIN_SUBSET:
        raise TooFewCorrespondences(f"need at least {MIN_SUBSET} correspondences, got {len(idx)}")
    if idx[0] < 0 or idx[-1] >= len(c):
        raise IndexError("subset index out of range")
    return idx


def _normal_equations(k, pose, c, idx):
    uv, J = stacked_jacobians(k, pose, c.points[idx])
    e = (uv - c.pixels[idx]).reshape(-1)
    J = J.reshape(-1, 6)
    return J.T @ J, J.T @ e


def _solve_damped(H, g, damping):
    A = H + damping * np.diag(np.diag(H))
    try:
        delta = np.linalg.solve(A, -g)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(delta)):
        return None
    return delta


def _newton_decrement(H, g) -> float:
    delta = _solve_damped(H, g, 0.0)
    return math.inf if delta is None else float(-g @ delta)


def _polish(k, c, idx, pose, cost, ceiling, steps=4):
    """Undamped Gauss-Newton steps judged by the Newton decrement.

    Near the optimum the cost change drops below the rounding noise of the
    cost sum, so cost-verified descent stalls around 1e-7 px.  The decrement
    g^T H^-1 g is first order in the residuals and stays resolvable.  Steps
    are still refused if they lift the cost above ``ceiling``.
    """
    H, g = _normal_equations(k, pose, c, idx)
    dec = _newton_decrement(H, g)
    for _ in range(steps):
        delta = _solve_damped(H, g, 0.0)
        if delta is None:
            break
        cand = pose.perturb_left(delta)
        cand_cost = subset_cost(k, cand, c, idx)
        if not cand_cost <= ceiling:
            break
        try:
            H2, g2 = _normal_equations(k, cand, c, idx)
        except BehindCamera:
            break
        dec2 = _newton_decrement(H2, g2)
        if not dec2 < dec:
            break
        pose, cost, H, g, dec = cand, cand_cost, H2, g2, dec2
    return pose, cost


def _initial_cost(k, pose, c, idx):
    cost = subset_cost(k, pose, c, idx)
    if not math.isfinite(cost):
        raise NumericalFailure("subset contains points behind the camera at the initial pose")
    return cost


def iterative_pnp(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    subset,
    initial: Pose,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> SolveReport:
    """Damped Gauss-Newton with step halving on the unweighted subset objective."""
    idx = _check_subset(c, subset)
    pose = initial
    cost0 = cost = _initial_cost(k, pose, c, idx)
    it = 0
    while it < max_iter and cost > EXACT_COST * len(idx):
        it += 1
        H, g = _normal_equations(k, pose, c, idx)
        delta = None
        for damping in (0.0, 1e-12, 1e-9, 1e-6, 1e-3):
            delta = _solve_damped(H, g, damping)
            if delta is not None:
                break
        if delta is None:
            raise NumericalFailure("normal equations are singular")
        accepted = False
        step = 1.0
        for _ in range(12):
            cand = pose.perturb_left(step * delta)
            cand_cost = subset_cost(k, cand, c, idx)
            if cand_cost < cost:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        decrease = (cost - cand_cost) / cost
        pose, cost = cand, cand_cost
        if decrease < tol:
            break
    if cost > EXACT_COST * len(idx):
        pose, cost = _polish(k, c, idx, pose, cost, min(cost0, cost * (1 + 1e-12)))
    return SolveReport(pose, it, cost, cost0)


def refine_lm(
    k: CameraIntrinsics,
    c: CorrespondenceSet,
    subset,
    initial: Pose,
    max_iter: int = 100,
    tol: float = 1e-10,
    initial_damping: float = 1e-3,
) -> SolveReport:
    """Levenberg-Marquardt with multiplicative damping updates (x10 / /10)."""
    idx = _check_subset(c, subset)
    pose = initial
    cost0 = cost = _initial_cost(k, pose, c, idx)
    damping = initial_damping
    it = 0
    while it < max_iter and cost > EXACT_COST * len(idx):
        it += 1
        H, g = _normal_equations(k, pose, c, idx)
        accepted = False
        while damping < 1e12:
            delta = _solve_damped(H, g, damping)
            if delta is not None:
                cand = pose.perturb_left(delta)
                cand_cost = subset_cost(k, cand, c, idx)
                if cand_cost < cost:
                    accepted = True
                    damping = max(damping / 10.0, 1e-12)
                    break
            damping *= 10.0
        if not accepted:
            break
        decrease = (cost - cand_cost) / cost
        pose, cost = cand, cand_cost
        if decrease < tol:
            break
    if cost > EXACT_COST * len(idx):
        pose, cost = _polish(k, c, idx, pose, cost, min(cost0, cost * (1 + 1e-12)))
    return SolveReport(pose, it, cost, cost0)
