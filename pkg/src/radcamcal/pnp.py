"""Pose-from-correspondences solvers and the RANSAC wrapper around them.

Two routes exist on purpose.  The iterative route runs damped least squares
on an axis-angle + translation parameterization from a mount prior.  The
algebraic route builds a direct linear system on undistorted normalized
coordinates, projects the linear estimate onto the rotation manifold, and
polishes it once.  Both report pixel reprojection statistics so the caller
can race them and keep the better fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from . import geometry
from .errors import (
    CalibrationError,
    DegenerateConfigurationError,
    EmptyInputError,
    InsufficientPointsError,
    RansacFailureError,
)
from .geometry import CameraModel, RigidTransform
from .optim import LmOptions, levenberg_marquardt

RESIDUAL_SENTINEL = 1e6
SolverKind = Literal["iterative", "algebraic"]


@dataclass(eq=False)
class Correspondence:
    """One aggregated radar point paired with one annotated pixel."""

    radar: np.ndarray
    pixel: np.ndarray
    source_timestamp: float = 0.0

    def __post_init__(self):
        self.radar = np.asarray(self.radar, dtype=float).reshape(3)
        self.pixel = np.asarray(self.pixel, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.radar)) and np.all(np.isfinite(self.pixel))):
            raise ValueError("correspondence values must be finite")
        if float(np.linalg.norm(self.radar)) == 0.0:
            raise ValueError("radar point must not sit at the sensor origin")


@dataclass
class RansacOptions:
    max_iters: int = 500
    sample_size: int = 4
    inlier_threshold: float = 8.0
    confidence: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.sample_size < 4:
            raise ValueError("sample_size must be at least 4")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")


@dataclass(eq=False)
class PnpSolution:
    """Estimated pose plus the pixel-error bookkeeping used for selection."""

    pose: RigidTransform
    rmse: float
    per_point_error: np.ndarray
    inlier_mask: np.ndarray


def default_mount_prior() -> RigidTransform:
    """Radar-to-camera axis permutation with zero offset; the LM start pose."""
    return RigidTransform(geometry.RADAR_TO_CAMERA_AXES.copy(), np.zeros(3))


def pose_to_params(pose: RigidTransform) -> np.ndarray:
    """Pack a pose as [axis-angle(3), translation(3)]."""
    return np.concatenate([geometry.rotation_to_axis_angle(pose.rotation), pose.translation])


def params_to_pose(x) -> RigidTransform:
    x = np.asarray(x, dtype=float).reshape(6)
    return RigidTransform(geometry.axis_angle_to_rotation(x[:3]), x[3:])


def _stack(corrs: Sequence[Correspondence]):
    radar = np.array([c.radar for c in corrs])
    pixels = np.array([c.pixel for c in corrs])
    return radar, pixels


def reprojection_residuals(pose: RigidTransform, corrs: Sequence[Correspondence],
                           cam: CameraModel) -> np.ndarray:
    """Stacked (projected - observed) pixel residuals, shape (2N,).

    A pair whose radar point falls at or behind the camera plane contributes
    a constant sentinel pair (1e6, 1e6) instead of a projection.
    """
    if len(corrs) == 0:
        raise EmptyInputError("no correspondences to evaluate")
    radar, pixels = _stack(corrs)
    pc = geometry.transform_point(pose, radar)
    depth = pc[:, 2]
    ok = depth > geometry.MIN_DEPTH
    res = np.full((len(corrs), 2), RESIDUAL_SENTINEL)
    if np.any(ok):
        norm = pc[ok, :2] / depth[ok, None]
        proj = geometry.normalized_to_pixel(cam, norm)
        res[ok] = np.atleast_2d(proj) - pixels[ok]
    return res.ravel()


def per_point_errors(pose: RigidTransform, corrs: Sequence[Correspondence],
                     cam: CameraModel) -> np.ndarray:
    """Euclidean pixel distance per correspondence, shape (N,)."""
    res = reprojection_residuals(pose, corrs, cam).reshape(-1, 2)
    return np.linalg.norm(res, axis=1)


def _so3_right_jacobian(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    K = geometry._skew(w)
    if theta < 1e-6:
        c1 = 0.5 - theta * theta / 24.0
        c2 = 1.0 / 6.0 - theta * theta / 120.0
    else:
        c1 = (1.0 - math.cos(theta)) / (theta * theta)
        c2 = (theta - math.sin(theta)) / (theta ** 3)
    return np.eye(3) - c1 * K + c2 * (K @ K)


def reprojection_jacobian(x, corrs: Sequence[Correspondence], cam: CameraModel) -> np.ndarray:
    """Analytic Jacobian of reprojection_residuals w.r.t. [axis-angle, t].

    Shape (2N, 6).  Rows belonging to behind-camera sentinel pairs are zero,
    matching the locally constant sentinel residual.
    """
    x = np.asarray(x, dtype=float).reshape(6)
    w = x[:3]
    R = geometry.axis_angle_to_rotation(w)
    Jr = _so3_right_jacobian(w)
    radar, _ = _stack(corrs)
    n = radar.shape[0]
    pc = radar @ R.T + x[3:]
    depth = pc[:, 2]
    ok = depth > geometry.MIN_DEPTH
    J = np.zeros((n, 2, 6))
    if np.any(ok):
        pr = radar[ok]
        pco = pc[ok]
        z = depth[ok]
        m = pr.shape[0]
        # d(camera point)/d(w) = -R [p_r]x Jr ; d(camera point)/d(t) = I
        skews = np.zeros((m, 3, 3))
        skews[:, 0, 1] = -pr[:, 2]
        skews[:, 0, 2] = pr[:, 1]
        skews[:, 1, 0] = pr[:, 2]
        skews[:, 1, 2] = -pr[:, 0]
        skews[:, 2, 0] = -pr[:, 1]
        skews[:, 2, 1] = pr[:, 0]
        dpc = np.zeros((m, 3, 6))
        dpc[:, :, :3] = -np.einsum("ab,nbc,cd->nad", R, skews, Jr)
        dpc[:, 0, 3] = 1.0
        dpc[:, 1, 4] = 1.0
        dpc[:, 2, 5] = 1.0
        norm = pco[:, :2] / z[:, None]
        dnorm = np.zeros((m, 2, 3))
        dnorm[:, 0, 0] = 1.0 / z
        dnorm[:, 0, 2] = -pco[:, 0] / (z * z)
        dnorm[:, 1, 1] = 1.0 / z
        dnorm[:, 1, 2] = -pco[:, 1] / (z * z)
        ddist = geometry.distortion_jacobian(norm, cam.dist)
        dpix = np.array([[cam.fx, cam.skew], [0.0, cam.fy]])
        chain = np.einsum("ab,nbc,ncd,nde->nae", dpix, ddist, dnorm, dpc)
        J[ok] = chain
    return J.reshape(2 * n, 6)


def _solution(pose: RigidTransform, corrs: Sequence[Correspondence], cam: CameraModel,
              mask: Optional[np.ndarray] = None) -> PnpSolution:
    err = per_point_errors(pose, corrs, cam)
    if mask is None:
        mask = np.ones(len(corrs), dtype=bool)
    sel = err[mask] if np.any(mask) else err
    rmse = float(np.sqrt(np.mean(sel ** 2)))
    return PnpSolution(pose=pose, rmse=rmse, per_point_error=err, inlier_mask=mask)


def solve_pnp_iterative(corrs: Sequence[Correspondence], cam: CameraModel,
                        init: Optional[RigidTransform] = None,
                        lm_opts: Optional[LmOptions] = None) -> PnpSolution:
    """Damped least-squares pose fit from an initial pose (mount prior by default)."""
    if len(corrs) < 4:
        raise InsufficientPointsError(
            f"iterative solver needs at least 4 correspondences, got {len(corrs)}"
        )
    start = init if init is not None else default_mount_prior()

    def residual(x):
        return reprojection_residuals(params_to_pose(x), corrs, cam)

    def jac(x):
        return reprojection_jacobian(x, corrs, cam)

    result = levenberg_marquardt(residual, pose_to_params(start), lm_opts, jacobian=jac)
    return _solution(params_to_pose(result.x), corrs, cam)


def solve_pnp_algebraic(corrs: Sequence[Correspondence], cam: CameraModel,
                        lm_opts: Optional[LmOptions] = None) -> PnpSolution:
    """Direct linear estimate on normalized coordinates plus one polish pass.

    Needs at least 6 correspondences.  Raises DegenerateConfigurationError
    when the linear system has no unique solution direction (for example a
    perfectly coplanar point set) or when no sign choice puts the point
    centroid in front of the camera.
    """
    n = len(corrs)
    if n < 6:
        raise InsufficientPointsError(
            f"algebraic solver needs at least 6 correspondences, got {n}"
        )
    radar, pixels = _stack(corrs)
    norm = geometry.pixel_to_normalized(cam, pixels)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:3] = radar
    A[0::2, 3] = 1.0
    A[0::2, 8:11] = -norm[:, 0:1] * radar
    A[0::2, 11] = -norm[:, 0]
    A[1::2, 4:7] = radar
    A[1::2, 7] = 1.0
    A[1::2, 8:11] = -norm[:, 1:2] * radar
    A[1::2, 11] = -norm[:, 1]
    _, S, Vt = np.linalg.svd(A)
    if S[0] <= 0.0 or S[-2] <= 1e-8 * S[0]:
        raise DegenerateConfigurationError(
            "linear system is rank deficient; points do not fix a unique pose"
        )
    M = Vt[-1].reshape(3, 4)
    pose0 = None
    for cand in (M, -M):
        B = cand[:, :3]
        U, s, Vt3 = np.linalg.svd(B)
        d = np.sign(np.linalg.det(U @ Vt3))
        R = U @ np.diag([1.0, 1.0, d]) @ Vt3
        scale = (s[0] + s[1] + d * s[2]) / 3.0
        if scale <= 0.0:
            continue
        t = cand[:, 3] / scale
        depths = radar @ R.T + t
        if float(np.mean(depths[:, 2])) > 0.0:
            pose0 = RigidTransform(R, t)
            break
    if pose0 is None:
        raise DegenerateConfigurationError(
            "no sign choice places the point centroid in front of the camera"
        )

    def residual(x):
        return reprojection_residuals(params_to_pose(x), corrs, cam)

    def jac(x):
        return reprojection_jacobian(x, corrs, cam)

    result = levenberg_marquardt(residual, pose_to_params(pose0), lm_opts, jacobian=jac)
    return _solution(params_to_pose(result.x), corrs, cam)


def _canonical_order(corrs: Sequence[Correspondence]) -> np.ndarray:
    """Input-permutation-independent ordering used for sampling and re-solves."""
    radar, pixels = _stack(corrs)
    ts = np.array([c.source_timestamp for c in corrs])
    return np.lexsort((radar[:, 2], radar[:, 1], radar[:, 0], pixels[:, 1], pixels[:, 0], ts))


def _required_iterations(inlier_ratio: float, sample_size: int, confidence: float) -> int:
    p_good = inlier_ratio ** sample_size
    if p_good >= 1.0:
        return 0
    if p_good <= 0.0:
        return np.iinfo(np.int32).max
    return int(math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p_good)))


def ransac_pnp(corrs: Sequence[Correspondence], cam: CameraModel,
               solver_kind: SolverKind = "iterative",
               opts: Optional[RansacOptions] = None,
               init: Optional[RigidTransform] = None) -> PnpSolution:
    """Consensus-maximizing pose fit, deterministic for a given seed.

    Sampling is counter-based: iteration k draws from a generator seeded by
    (seed, k) over the canonical ordering of the correspondences, so results
    do not depend on input order and iterations could run in parallel without
    changing the outcome.  The best model maximizes the inlier count with
    ties broken by lower inlier rmse; the final pose is re-solved on the full
    inlier set.
    """
    opts = opts or RansacOptions()
    n = len(corrs)
    sample_size = opts.sample_size if solver_kind == "iterative" else max(opts.sample_size, 6)
    if n < sample_size:
        raise InsufficientPointsError(
            f"RANSAC with the {solver_kind} solver needs {sample_size} correspondences, got {n}"
        )
    order = _canonical_order(corrs)
    seed = int(opts.seed) & 0xFFFFFFFFFFFFFFFF
    best_pose = None
    best_count = -1
    best_rmse = math.inf
    best_mask = None
    needed = opts.max_iters
    k = 0
    while k < min(needed, opts.max_iters):
        rng = np.random.default_rng([seed, k])
        pick = np.sort(rng.choice(n, size=sample_size, replace=False))
        sample = [corrs[order[i]] for i in pick]
        k += 1
        try:
            if solver_kind == "iterative":
                model = solve_pnp_iterative(sample, cam, init=init)
            else:
                model = solve_pnp_algebraic(sample, cam)
        except CalibrationError:
            continue
        err = per_point_errors(model.pose, corrs, cam)
        mask = err <= opts.inlier_threshold
        count = int(mask.sum())
        if count < sample_size:
            continue
        rmse = float(np.sqrt(np.mean(err[mask] ** 2)))
        if count > best_count or (count == best_count and rmse < best_rmse):
            best_pose, best_count, best_rmse, best_mask = model.pose, count, rmse, mask
            needed = min(needed, _required_iterations(count / n, sample_size, opts.confidence))
    min_consensus = min(sample_size + 2, n)
    if best_pose is None or best_count < min_consensus:
        raise RansacFailureError(
            f"no model reached {min_consensus} inliers within {opts.max_iters} iterations"
        )
    inliers = [corrs[i] for i in order if best_mask[i]]
    final_pose = best_pose
    try:
        if solver_kind == "iterative":
            refit = solve_pnp_iterative(inliers, cam, init=best_pose)
        else:
            refit = solve_pnp_algebraic(inliers, cam)
        err = per_point_errors(refit.pose, corrs, cam)
        mask = err <= opts.inlier_threshold
        if int(mask.sum()) >= min_consensus:
            final_pose, best_mask = refit.pose, mask
    except CalibrationError:
        pass
    return _solution(final_pose, corrs, cam, mask=best_mask)


def refine_all_pairs(pose0: RigidTransform, corrs: Sequence[Correspondence],
                     cam: CameraModel, trim_threshold: Optional[float] = None,
                     lm_opts: Optional[LmOptions] = None) -> PnpSolution:
    """Polish a pose against every correspondence.

    With trim_threshold set, every pair is re-scored each round and pairs
    whose pixel distance exceeds the threshold sit that round out; rounds
    repeat until the parameters settle, so no pair is permanently masked
    and a pair can re-enter once the pose improves.  On data where all
    pairs stay inside the threshold this is identical to the plain
    least-squares fit, which is what trim_threshold=None always does.
    """
    if len(corrs) == 0:
        raise EmptyInputError("no correspondences to refine against")
    x = pose_to_params(pose0)

    def residual_plain(p):
        return reprojection_residuals(params_to_pose(p), corrs, cam)

    def jac_plain(p):
        return reprojection_jacobian(p, corrs, cam)

    if trim_threshold is None:
        result = levenberg_marquardt(residual_plain, x, lm_opts, jacobian=jac_plain)
        x = result.x
    else:
        for _ in range(4):
            err = per_point_errors(params_to_pose(x), corrs, cam)
            keep = err <= trim_threshold
            if keep.sum() < 4:
                break
            kept = np.repeat(keep, 2)

            def residual(p, kept=kept):
                return residual_plain(p)[kept]

            def jac(p, kept=kept):
                return jac_plain(p)[kept]

            result = levenberg_marquardt(residual, x, lm_opts, jacobian=jac)
            step = float(np.max(np.abs(result.x - x)))
            x = result.x
            if step < 1e-12:
                break
    return _solution(params_to_pose(x), corrs, cam)
