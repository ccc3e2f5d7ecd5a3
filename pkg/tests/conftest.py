"""Shared fixtures and small geometry helpers for the test suite.

The two session-scoped Monte-Carlo fixtures run the full pipeline over 50
seeds once and are shared between the acceptance gates and the statistical
scenario tests, so the expensive batches execute a single time per run.
"""

from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import settings

import radcamcal as rc
from radcamcal.geometry import RADAR_TO_CAMERA_AXES
from radcamcal.pnp import Correspondence

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


def rotation_angle(Ra, Rb) -> float:
    """Geodesic distance between two rotations, radians."""
    return float(np.linalg.norm(rc.rotation_to_axis_angle(np.asarray(Ra).T @ np.asarray(Rb))))


def pose_errors(estimated: rc.RigidTransform, truth: rc.RigidTransform):
    rot = rotation_angle(estimated.rotation, truth.rotation)
    trans = float(np.linalg.norm(estimated.translation - truth.translation))
    return rot, trans


def simple_cam() -> rc.CameraModel:
    """Distortion-free pinhole used by solver-level tests."""
    return rc.CameraModel(fx=1000.0, fy=1000.0, cx=640.0, cy=360.0)


def generic_pose() -> rc.RigidTransform:
    """A mount-like pose with a non-trivial twist and offset."""
    rotation = RADAR_TO_CAMERA_AXES @ rc.axis_angle_to_rotation([0.02, 0.12, -0.03])
    return rc.RigidTransform(rotation, np.array([0.03, -0.05, 0.02]))


def perturb_pose(pose: rc.RigidTransform, rot_rad: float, trans_m: float,
                 seed: int = 0) -> rc.RigidTransform:
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    shift = rng.normal(size=3)
    shift *= trans_m / np.linalg.norm(shift)
    rotation = pose.rotation @ rc.axis_angle_to_rotation(axis * rot_rad)
    return rc.RigidTransform(rotation, pose.translation + shift)


def make_exact_pairs(pose: rc.RigidTransform, cam: rc.CameraModel, n: int,
                     seed: int = 0, planar_z: float | None = None) -> list[Correspondence]:
    """Correspondences whose pixels are exact projections of random points.

    Points are spread over the working volume in front of the radar; with
    planar_z set they all share one radar-frame z, giving a coplanar set.
    """
    rng = np.random.default_rng(seed)
    points = np.column_stack([
        rng.uniform(4.0, 14.0, n),
        rng.uniform(-3.0, 3.0, n),
        np.full(n, planar_z) if planar_z is not None else rng.uniform(-2.0, 1.0, n),
    ])
    return [Correspondence(radar=p, pixel=rc.project_point(cam, pose, p)) for p in points]


def scenario_options(scn: rc.Scenario, **overrides) -> rc.PipelineOptions:
    return rc.PipelineOptions(start_timestamp=scn.start_timestamp, **overrides)


def _holdout_aed(scn: rc.Scenario, pose: rc.RigidTransform) -> float:
    pairs = []
    for point in scn.true_placements:
        true_px = rc.project_point(scn.cam, scn.ground_truth, point)
        est_px = rc.project_point(scn.cam, pose, point)
        pairs.append((true_px, est_px))
    return rc.aed(pairs)


def _run_seed(seed: int, outlier_fraction: float) -> SimpleNamespace:
    scn = rc.generate_scenario(rc.ScenarioParams(seed=seed,
                                                 outlier_fraction=outlier_fraction))
    result = rc.calibrate(scn.detections, scn.annotations, scn.cam,
                          scenario_options(scn))
    rot, trans = pose_errors(result.pose, scn.ground_truth)
    planted_rejected = (result.correspondences_used == len(scn.annotations)
                        and not result.inlier_mask[scn.planted_outlier_indices].any())
    return SimpleNamespace(seed=seed, rot_err=rot, trans_err=trans,
                           holdout_aed=_holdout_aed(scn, result.pose),
                           planted_rejected=planted_rejected)


@pytest.fixture(scope="session")
def noisy_monte_carlo():
    """50-seed batch at default noise (2 cm radar, 1 px pixel)."""
    t0 = time.perf_counter()
    rows = [_run_seed(seed, 0.0) for seed in range(50)]
    return SimpleNamespace(rows=rows, elapsed=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def outlier_monte_carlo():
    """50-seed batch with 30% of annotations replaced by gross outliers."""
    t0 = time.perf_counter()
    rows = [_run_seed(seed, 0.3) for seed in range(50)]
    return SimpleNamespace(rows=rows, elapsed=time.perf_counter() - t0)
