"""End-to-end calibration: timestamp alignment, static-target windowing,
per-axis outlier gating, and the dual-solver pose race with final refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import pnp
from .errors import (
    CalibrationError,
    CalibrationFailureError,
    EmptyInputError,
    InsufficientDataError,
    OrderingError,
)
from .geometry import CameraModel, EulerXYZ, RigidTransform, rotation_to_euler
from .optim import zscore
from .pnp import Correspondence, RansacOptions


@dataclass
class RadarDetection:
    """One radar return; range is derived from the coordinates when omitted."""

    timestamp: float
    x: float
    y: float
    z: float
    velocity: float
    range: Optional[float] = None

    def __post_init__(self):
        values = [self.timestamp, self.x, self.y, self.z, self.velocity]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("detection fields must be finite")
        measured = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if self.range is None:
            self.range = measured
        elif not math.isfinite(self.range) or abs(self.range - measured) > 1e-6:
            raise ValueError(
                f"range {self.range} inconsistent with coordinates (expected {measured})"
            )

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass
class ImageAnnotation:
    """Pixel location of the target in one video frame, on the local clock."""

    local_timestamp: float
    u: float
    v: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.local_timestamp, self.u, self.v)):
            raise ValueError("annotation fields must be finite")
        if self.u < 0 or self.v < 0:
            raise ValueError("pixel coordinates must be non-negative")


@dataclass
class PipelineOptions:
    start_timestamp: float = 0.0
    max_range: float = 20.0
    velocity_eps: float = 1e-3
    window_half_width: float = 1.0
    zscore_thresholds: tuple = (2.0, 2.0, 2.0)
    ransac: RansacOptions = field(default_factory=RansacOptions)

    def __post_init__(self):
        if self.max_range <= 0 or self.window_half_width <= 0:
            raise ValueError("max_range and window_half_width must be positive")
        if self.velocity_eps < 0:
            raise ValueError("velocity_eps must be non-negative")
        if len(self.zscore_thresholds) != 3 or any(t <= 0 for t in self.zscore_thresholds):
            raise ValueError("zscore_thresholds must be three positive values")


@dataclass(eq=False)
class CalibrationResult:
    pose: RigidTransform
    euler: EulerXYZ
    rmse: float
    inlier_mask: np.ndarray
    per_pair_error: np.ndarray
    solver_chosen: str
    correspondences_used: int


def absolutize_timestamps(annotations: Sequence[ImageAnnotation],
                          start_timestamp: float) -> np.ndarray:
    """Shift local video timestamps onto the shared clock."""
    local = np.array([a.local_timestamp for a in annotations])
    if np.any(np.diff(local) < 0):
        raise OrderingError("annotations must be sorted by local timestamp")
    return local + start_timestamp


def static_filter(detections: Sequence[RadarDetection],
                  opts: PipelineOptions) -> list[RadarDetection]:
    """Keep stationary returns inside the working range."""
    return [d for d in detections
            if abs(d.velocity) <= opts.velocity_eps and d.range < opts.max_range]


def associate_closest(radar_timestamps, image_timestamps) -> np.ndarray:
    """Nearest radar timestamp for each image timestamp; ties pick the earlier."""
    radar_ts = np.asarray(radar_timestamps, dtype=float)
    image_ts = np.asarray(image_timestamps, dtype=float)
    if radar_ts.size == 0 or image_ts.size == 0:
        raise EmptyInputError("timestamp association needs non-empty inputs")
    idx = np.searchsorted(radar_ts, image_ts)
    idx = np.clip(idx, 1, radar_ts.size - 1) if radar_ts.size > 1 else np.zeros_like(idx)
    left = radar_ts[np.maximum(idx - 1, 0)]
    right = radar_ts[idx]
    out = np.where(image_ts - left <= right - image_ts, left, right)
    return out


def aggregate_window(detections: Sequence[RadarDetection], center_ts: float,
                     opts: PipelineOptions) -> Optional[np.ndarray]:
    """Mean position of gated detections near center_ts, or None.

    The window is the closed interval of +/- window_half_width seconds around
    the integer-rounded center.  Detections keep their place only if the
    per-axis z-score magnitude stays under the matching threshold on every
    axis; the survivors are averaged.
    """
    center = math.floor(center_ts + 0.5)
    lo, hi = center - opts.window_half_width, center + opts.window_half_width
    window = [d for d in detections if lo <= d.timestamp <= hi]
    if not window:
        return None
    coords = np.array([[d.x, d.y, d.z] for d in window])
    keep = np.ones(len(window), dtype=bool)
    for axis in range(3):
        keep &= np.abs(zscore(coords[:, axis])) < opts.zscore_thresholds[axis]
    if not np.any(keep):
        return None
    return coords[keep].mean(axis=0)


def build_correspondences(detections: Sequence[RadarDetection],
                          annotations: Sequence[ImageAnnotation],
                          opts: PipelineOptions) -> list[Correspondence]:
    """Pair each annotation with the aggregated radar point in its window.

    Annotations whose window is empty or fully gated out are dropped.  Fewer
    than four surviving pairs raises InsufficientDataError.
    """
    if not detections or not annotations:
        raise EmptyInputError("detections and annotations must be non-empty")
    image_ts = absolutize_timestamps(annotations, opts.start_timestamp)
    static = sorted(static_filter(detections, opts), key=lambda d: d.timestamp)
    if not static:
        raise InsufficientDataError("no stationary detections inside the working range")
    radar_ts = np.unique([d.timestamp for d in static])
    centers = associate_closest(radar_ts, image_ts)
    corrs = []
    for ann, ts_img, center in zip(annotations, image_ts, centers):
        agg = aggregate_window(static, center, opts)
        if agg is None:
            continue
        corrs.append(Correspondence(radar=agg, pixel=(ann.u, ann.v), source_timestamp=ts_img))
    if len(corrs) < 4:
        raise InsufficientDataError(
            f"only {len(corrs)} usable correspondences; at least 4 required"
        )
    return corrs


def calibrate(detections: Sequence[RadarDetection],
              annotations: Sequence[ImageAnnotation],
              cam: CameraModel, opts: PipelineOptions) -> CalibrationResult:
    """Full pipeline: associate, aggregate, race both solvers, refine.

    The iterative route always runs; the algebraic route joins when at least
    six pairs exist.  The candidate with the smaller rmse wins (ties go to
    the iterative route) and is then refined against all pairs with bounded
    outlier influence at the consensus threshold.
    """
    corrs = build_correspondences(detections, annotations, opts)
    candidates: dict[str, pnp.PnpSolution] = {}
    causes: dict[str, CalibrationError] = {}
    try:
        candidates["iterative"] = pnp.ransac_pnp(corrs, cam, "iterative", opts.ransac)
    except CalibrationError as exc:
        causes["iterative"] = exc
    if len(corrs) >= 6:
        try:
            candidates["algebraic"] = pnp.ransac_pnp(corrs, cam, "algebraic", opts.ransac)
        except CalibrationError as exc:
            causes["algebraic"] = exc
    if not candidates:
        detail = "; ".join(f"{name}: {exc}" for name, exc in causes.items())
        raise CalibrationFailureError(f"every solver route failed ({detail})", causes=causes)
    if "iterative" in candidates and (
            "algebraic" not in candidates
            or candidates["iterative"].rmse <= candidates["algebraic"].rmse):
        chosen = "iterative"
    else:
        chosen = "algebraic"
    refined = pnp.refine_all_pairs(candidates[chosen].pose, corrs, cam,
                                   trim_threshold=opts.ransac.inlier_threshold)
    mask = refined.per_point_error <= opts.ransac.inlier_threshold
    return CalibrationResult(
        pose=refined.pose,
        euler=rotation_to_euler(refined.pose.rotation),
        rmse=refined.rmse,
        inlier_mask=mask,
        per_pair_error=refined.per_point_error,
        solver_chosen=chosen,
        correspondences_used=len(corrs),
    )
