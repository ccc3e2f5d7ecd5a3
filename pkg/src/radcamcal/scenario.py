"""Synthetic data generator used as the verification oracle for the pipeline.

The modeled rig: a radar pitched down by tilt_deg looks at corner reflectors
standing on flat ground, with a level camera mounted baseline_m below it.
Ground positions are drawn in world coordinates (x forward, y right), mapped
into the radar frame from the mount height and tilt, and projected through
the ground-truth extrinsics to make pixel annotations.  All randomness comes
from one seeded generator, so a fixed seed reproduces the scenario exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BehindCameraError, InfeasibleScenarioError
from .geometry import (
    RADAR_TO_CAMERA_AXES,
    CameraModel,
    RigidTransform,
    axis_angle_to_rotation,
    project_point,
)
from .pipeline import ImageAnnotation, RadarDetection

IMAGE_WIDTH = 1280
IMAGE_HEIGHT = 720
START_TIMESTAMP = 1_700_000_000.0
PLACEMENT_GAP_S = 2.0
FEASIBLE_MARGIN_PX = 10.0
OUTLIER_MIN_SHIFT_PX = 100.0
MAX_PLACEMENT_ATTEMPTS = 100


def default_camera() -> CameraModel:
    """A 720p camera with a ~49 degree horizontal field of view."""
    return CameraModel(fx=1400.0, fy=1400.0, cx=640.0, cy=360.0, skew=0.0,
                       dist=np.array([-0.12, 0.02, 0.0004, -0.0003, 0.0]))


@dataclass
class ScenarioParams:
    tilt_deg: float = 10.0
    baseline_m: float = 0.045
    n_placements: int = 20
    ground_extent: tuple = (3.0, 15.0, -4.0, 4.0)
    sensor_height_m: float = 1.5
    radar_noise_sigma: float = 0.02
    pixel_noise_sigma: float = 1.0
    radar_rate_hz: float = 10.0
    dwell_s: float = 4.0
    outlier_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_placements < 1:
            raise ValueError("n_placements must be at least 1")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if self.radar_noise_sigma < 0 or self.pixel_noise_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.radar_rate_hz <= 0 or self.dwell_s <= 0:
            raise ValueError("radar_rate_hz and dwell_s must be positive")
        if self.sensor_height_m <= 0:
            raise ValueError("sensor_height_m must be positive")
        x_min, x_max, y_min, y_max = self.ground_extent
        if x_min >= x_max or y_min >= y_max:
            raise ValueError("ground_extent must be (x_min, x_max, y_min, y_max)")


@dataclass(eq=False)
class Scenario:
    ground_truth: RigidTransform
    cam: CameraModel
    detections: list
    annotations: list
    start_timestamp: float
    true_placements: list
    planted_outlier_indices: list


def nominal_extrinsics(tilt_deg: float = 10.0, baseline_m: float = 0.045) -> RigidTransform:
    """Radar-to-camera transform for the modeled mount.

    Rotation is the radar-to-camera axis permutation composed with the
    relative pitch between the tilted radar and the level camera; translation
    puts the radar origin baseline_m above the camera (negative y, since
    camera y points down).
    """
    tilt = math.radians(tilt_deg)
    rotation = RADAR_TO_CAMERA_AXES @ axis_angle_to_rotation([0.0, tilt, 0.0])
    return RigidTransform(rotation, np.array([0.0, -baseline_m, 0.0]))


def _ground_to_radar(x_fwd: float, y_lat: float, tilt: float, height: float) -> np.ndarray:
    """Radar-frame coordinates of a ground point, given mount height and tilt."""
    c, s = math.cos(tilt), math.sin(tilt)
    return np.array([c * x_fwd + s * height, y_lat, s * x_fwd - c * height])


def _inside_image(pixel, margin: float = 0.0) -> bool:
    return (margin <= pixel[0] <= IMAGE_WIDTH - margin
            and margin <= pixel[1] <= IMAGE_HEIGHT - margin)


def generate_scenario(params: Optional[ScenarioParams] = None) -> Scenario:
    """Build a full synthetic recording session for the given parameters.

    Each placement contributes dwell_s * radar_rate_hz noisy detections and
    one annotation at the true projection plus pixel noise; a fraction of
    annotations is replaced by gross outliers displaced at least 100 px, and
    their indices are recorded.
    """
    p = params or ScenarioParams()
    rng = np.random.default_rng(p.seed)
    # The whole rig pitches down together, so the radar-to-camera transform
    # is the axis permutation plus the mounting baseline; tilt_deg shapes
    # where ground placements land in the (shared) sensor frames instead.
    truth = nominal_extrinsics(0.0, p.baseline_m)
    cam = default_camera()
    tilt = math.radians(p.tilt_deg)
    x_min, x_max, y_min, y_max = p.ground_extent

    # Placements are jittered over a grid of ground cells rather than drawn
    # iid, mirroring how an operator walks the reflector around to cover the
    # scene; iid draws occasionally cluster and leave the pose poorly
    # conditioned.  Cells with no view into the image (near corners) fall
    # back to the whole extent after half the attempt budget.
    n_cols = max(1, int(math.ceil(math.sqrt(p.n_placements))))
    n_rows = max(1, int(math.ceil(p.n_placements / n_cols)))
    placements = []
    true_pixels = []
    for k in range(p.n_placements):
        row, col = divmod(k, n_cols)
        cell_x = (x_min + (x_max - x_min) * row / n_rows,
                  x_min + (x_max - x_min) * (row + 1) / n_rows)
        cell_y = (y_min + (y_max - y_min) * col / n_cols,
                  y_min + (y_max - y_min) * (col + 1) / n_cols)
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            if attempt < MAX_PLACEMENT_ATTEMPTS // 2:
                x_fwd = rng.uniform(*cell_x)
                y_lat = rng.uniform(*cell_y)
            else:
                x_fwd = rng.uniform(x_min, x_max)
                y_lat = rng.uniform(y_min, y_max)
            point = _ground_to_radar(x_fwd, y_lat, tilt, p.sensor_height_m)
            try:
                pixel = project_point(cam, truth, point)
            except BehindCameraError:
                continue
            if _inside_image(pixel, FEASIBLE_MARGIN_PX):
                placements.append(point)
                true_pixels.append(pixel)
                break
        else:
            raise InfeasibleScenarioError(
                "could not place a target inside the image; extent and tilt disagree"
            )

    detections = []
    annotations = []
    period = p.dwell_s + PLACEMENT_GAP_S
    frames = int(round(p.dwell_s * p.radar_rate_hz))
    for k, point in enumerate(placements):
        t0 = START_TIMESTAMP + k * period
        for i in range(frames):
            pos = point + rng.normal(0.0, p.radar_noise_sigma, 3)
            vel = float(rng.normal(0.0, 1e-4))
            detections.append(RadarDetection(
                timestamp=t0 + i / p.radar_rate_hz,
                x=float(pos[0]), y=float(pos[1]), z=float(pos[2]),
                velocity=vel,
            ))
        pixel = true_pixels[k] + rng.normal(0.0, p.pixel_noise_sigma, 2)
        pixel = np.maximum(pixel, 0.0)
        annotations.append(ImageAnnotation(
            local_timestamp=k * period + p.dwell_s / 2.0,
            u=float(pixel[0]), v=float(pixel[1]),
        ))

    n_outliers = int(round(p.outlier_fraction * p.n_placements))
    outlier_indices = sorted(rng.choice(p.n_placements, size=n_outliers, replace=False).tolist())
    for idx in outlier_indices:
        reference = true_pixels[idx]
        while True:
            u = rng.uniform(0.0, IMAGE_WIDTH)
            v = rng.uniform(0.0, IMAGE_HEIGHT)
            if math.hypot(u - reference[0], v - reference[1]) >= OUTLIER_MIN_SHIFT_PX:
                break
        ann = annotations[idx]
        annotations[idx] = ImageAnnotation(local_timestamp=ann.local_timestamp, u=u, v=v)

    return Scenario(
        ground_truth=truth,
        cam=cam,
        detections=detections,
        annotations=annotations,
        start_timestamp=START_TIMESTAMP,
        true_placements=placements,
        planted_outlier_indices=[int(i) for i in outlier_indices],
    )


def add_clutter(scenario: Scenario, n_points: int,
                region: tuple = ((2.0, 18.0), (-5.0, 5.0), (-2.0, 2.0)),
                seed: int = 0) -> Scenario:
    """Return a copy of the scenario with non-static returns mixed in.

    Every added detection either moves faster than any static gate admits
    (|velocity| in [0.2, 5] m/s) or sits beyond the working range (>= 21 m),
    so the pipeline's static filter removes all of them.
    """
    if n_points < 0:
        raise ValueError("n_points must be non-negative")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5EED])
    if scenario.detections:
        t_lo = min(d.timestamp for d in scenario.detections)
        t_hi = max(d.timestamp for d in scenario.detections)
    else:
        t_lo, t_hi = scenario.start_timestamp, scenario.start_timestamp + 1.0
    (x0, x1), (y0, y1), (z0, z1) = region
    extra = []
    for i in range(n_points):
        pos = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(z0, z1)])
        ts = float(rng.uniform(t_lo, t_hi))
        if i % 2 == 0:
            speed = float(rng.uniform(0.2, 5.0)) * (1.0 if rng.random() < 0.5 else -1.0)
        else:
            length = float(np.linalg.norm(pos))
            if length == 0.0:
                pos = np.array([1.0, 0.0, 0.0])
                length = 1.0
            pos = pos * (rng.uniform(21.0, 40.0) / length)
            speed = 0.0
        extra.append(RadarDetection(timestamp=ts, x=float(pos[0]), y=float(pos[1]),
                                    z=float(pos[2]), velocity=speed))
    return Scenario(
        ground_truth=scenario.ground_truth,
        cam=scenario.cam,
        detections=list(scenario.detections) + extra,
        annotations=list(scenario.annotations),
        start_timestamp=scenario.start_timestamp,
        true_placements=list(scenario.true_placements),
        planted_outlier_indices=list(scenario.planted_outlier_indices),
    )
