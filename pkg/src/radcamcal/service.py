"""HTTP facade over the calibration pipeline.

Request and response bodies mirror the on-disk formats one to one, so the
CLI can parse a file, post its rows, and write the response back out without
reshaping anything.  Domain failures map to HTTP 422 with a stable error
code; malformed request bodies keep FastAPI's standard validation response.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__, metrics, pipeline, scenario
from .errors import BehindCameraError, CalibrationError, EmptyInputError
from .geometry import CameraModel, RigidTransform, project_point, rotation_to_euler
from .metrics import BBox
from .pipeline import ImageAnnotation, PipelineOptions, RadarDetection
from .pnp import RansacOptions


class DetectionModel(BaseModel):
    timestamp_s: float
    x_m: float
    y_m: float
    z_m: float
    velocity_mps: float
    range_m: Optional[float] = None


class AnnotationModel(BaseModel):
    local_ts_s: float
    u_px: float
    v_px: float


class IntrinsicsModel(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    dist: list[float] = Field(default_factory=lambda: [0.0] * 5,
                              min_length=5, max_length=5)


class BBoxModel(BaseModel):
    timestamp_s: float
    min_u: float
    min_v: float
    max_u: float
    max_v: float


class ProjectedPointModel(BaseModel):
    timestamp_s: float
    u_px: float
    v_px: float


class CalibrationModel(BaseModel):
    """Mirrors the calibration file layout."""

    rotation: list[float] = Field(min_length=9, max_length=9)
    translation: list[float] = Field(min_length=3, max_length=3)
    euler_xyz: list[float] = Field(min_length=3, max_length=3)
    rmse: float
    aed: float
    cdsd: float
    inliers: int
    solver_chosen: str
    version: str
    seed: int


class CalibrateRequest(BaseModel):
    detections: list[DetectionModel]
    annotations: list[AnnotationModel]
    intrinsics: IntrinsicsModel
    start_ts: float
    seed: int = 0
    max_range: float = 20.0
    velocity_eps: float = 1e-3
    window_half_width: float = 1.0
    zscore_thresholds: tuple[float, float, float] = (2.0, 2.0, 2.0)
    ransac_threshold: float = 8.0
    ransac_iters: int = 500
    confidence: float = 0.999


class CalibrateResponse(BaseModel):
    calibration: CalibrationModel
    inlier_mask: list[bool]
    per_pair_error_px: list[float]
    correspondences_used: int


class ProjectRequest(BaseModel):
    calibration: CalibrationModel
    detections: list[DetectionModel]
    intrinsics: IntrinsicsModel


class ProjectResponse(BaseModel):
    points: list[ProjectedPointModel]
    behind_camera: int


class MetricsRequest(BaseModel):
    projected: list[ProjectedPointModel]
    annotations: list[AnnotationModel]
    bboxes: Optional[list[BBoxModel]] = None
    match_tol_s: float = 0.05
    start_ts: float = 0.0


class MetricsResponse(BaseModel):
    aed: float
    cdsd: Optional[float]
    acc: Optional[float]
    pairs: int


class SimulateRequest(BaseModel):
    tilt_deg: float = 10.0
    baseline_m: float = 0.045
    n_placements: int = 20
    ground_extent: tuple[float, float, float, float] = (3.0, 15.0, -4.0, 4.0)
    sensor_height_m: float = 1.5
    radar_noise_sigma: float = 0.02
    pixel_noise_sigma: float = 1.0
    radar_rate_hz: float = 10.0
    dwell_s: float = 4.0
    outlier_fraction: float = 0.0
    seed: int = 0


class SimulateResponse(BaseModel):
    detections: list[DetectionModel]
    annotations: list[AnnotationModel]
    intrinsics: IntrinsicsModel
    ground_truth: CalibrationModel
    start_ts: float
    true_placements: list[list[float]]
    planted_outlier_indices: list[int]


def _camera_from_model(m: IntrinsicsModel) -> CameraModel:
    return CameraModel(fx=m.fx, fy=m.fy, cx=m.cx, cy=m.cy, skew=m.skew, dist=m.dist)


def _camera_to_model(cam: CameraModel) -> IntrinsicsModel:
    return IntrinsicsModel(fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
                           skew=cam.skew, dist=[float(v) for v in cam.dist])


def _detections_from_models(models: list[DetectionModel]) -> list[RadarDetection]:
    return [RadarDetection(timestamp=m.timestamp_s, x=m.x_m, y=m.y_m, z=m.z_m,
                           velocity=m.velocity_mps, range=m.range_m) for m in models]


def _pose_from_calibration(calibration: CalibrationModel) -> RigidTransform:
    R = np.asarray(calibration.rotation, dtype=float).reshape(3, 3)
    return RigidTransform(R, np.asarray(calibration.translation, dtype=float))


def _pair_stats(distances: np.ndarray):
    d = np.asarray(distances, dtype=float)
    mean = metrics.aed_from_distances(d) if d.size else 0.0
    spread = metrics.cdsd_from_distances(d) if d.size >= 2 else None
    return mean, spread


def create_app() -> FastAPI:
    app = FastAPI(title="radcamcal", version=__version__)

    @app.exception_handler(CalibrationError)
    async def _domain_error(request: Request, exc: CalibrationError):
        return JSONResponse(status_code=422,
                            content={"error": exc.code, "message": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422,
                            content={"error": "invalid-input", "message": str(exc)})

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/calibrate", response_model=CalibrateResponse)
    async def calibrate_endpoint(req: CalibrateRequest) -> CalibrateResponse:
        cam = _camera_from_model(req.intrinsics)
        opts = PipelineOptions(
            start_timestamp=req.start_ts,
            max_range=req.max_range,
            velocity_eps=req.velocity_eps,
            window_half_width=req.window_half_width,
            zscore_thresholds=tuple(req.zscore_thresholds),
            ransac=RansacOptions(max_iters=req.ransac_iters,
                                 inlier_threshold=req.ransac_threshold,
                                 confidence=req.confidence, seed=req.seed),
        )
        detections = _detections_from_models(req.detections)
        annotations = [ImageAnnotation(local_timestamp=a.local_ts_s, u=a.u_px, v=a.v_px)
                       for a in req.annotations]
        result = pipeline.calibrate(detections, annotations, cam, opts)
        mean, spread = _pair_stats(result.per_pair_error)
        calibration = CalibrationModel(
            rotation=[float(v) for v in result.pose.rotation.ravel()],
            translation=[float(v) for v in result.pose.translation],
            euler_xyz=[result.euler.psi, result.euler.theta, result.euler.phi],
            rmse=result.rmse,
            aed=mean,
            cdsd=spread if spread is not None else 0.0,
            inliers=int(result.inlier_mask.sum()),
            solver_chosen=result.solver_chosen,
            version=__version__,
            seed=req.seed,
        )
        return CalibrateResponse(
            calibration=calibration,
            inlier_mask=[bool(b) for b in result.inlier_mask],
            per_pair_error_px=[float(v) for v in result.per_pair_error],
            correspondences_used=result.correspondences_used,
        )

    @app.post("/project", response_model=ProjectResponse)
    async def project_endpoint(req: ProjectRequest) -> ProjectResponse:
        cam = _camera_from_model(req.intrinsics)
        pose = _pose_from_calibration(req.calibration)
        points = []
        behind = 0
        for det in req.detections:
            p = np.array([det.x_m, det.y_m, det.z_m])
            try:
                pixel = project_point(cam, pose, p)
            except BehindCameraError:
                behind += 1
                continue
            points.append(ProjectedPointModel(timestamp_s=det.timestamp_s,
                                              u_px=float(pixel[0]), v_px=float(pixel[1])))
        return ProjectResponse(points=points, behind_camera=behind)

    @app.post("/metrics", response_model=MetricsResponse)
    async def metrics_endpoint(req: MetricsRequest) -> MetricsResponse:
        # Annotation clocks are video-local; start_ts moves them onto the
        # radar clock so nearest-timestamp matching can land.
        ann_ts = np.array([a.local_ts_s + req.start_ts for a in req.annotations])
        if ann_ts.size == 0 or len(req.projected) == 0:
            raise EmptyInputError("metrics need both projected points and annotations")
        order = np.argsort(ann_ts, kind="stable")
        ann_sorted = ann_ts[order]
        pairs = []
        for pt in req.projected:
            i = int(np.searchsorted(ann_sorted, pt.timestamp_s))
            best = None
            for j in (i - 1, i):
                if 0 <= j < ann_sorted.size:
                    gap = abs(ann_sorted[j] - pt.timestamp_s)
                    if best is None or gap < best[0]:
                        best = (gap, int(order[j]))
            if best is not None and best[0] <= req.match_tol_s:
                ann = req.annotations[best[1]]
                pairs.append(((ann.u_px, ann.v_px), (pt.u_px, pt.v_px)))
        if not pairs:
            raise EmptyInputError("no projected point matched an annotation in time")
        mean = metrics.aed(pairs)
        spread = metrics.cdsd(pairs) if len(pairs) >= 2 else None
        hit_rate = None
        if req.bboxes is not None:
            boxes = [BBox(timestamp=b.timestamp_s, min_u=b.min_u, min_v=b.min_v,
                          max_u=b.max_u, max_v=b.max_v) for b in req.bboxes]
            projected = [(pt.timestamp_s, np.array([pt.u_px, pt.v_px]))
                         for pt in req.projected]
            hit_rate = metrics.acc(projected, boxes, match_tol=req.match_tol_s)
        return MetricsResponse(aed=mean, cdsd=spread, acc=hit_rate, pairs=len(pairs))

    @app.post("/simulate", response_model=SimulateResponse)
    async def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
        params = scenario.ScenarioParams(
            tilt_deg=req.tilt_deg, baseline_m=req.baseline_m,
            n_placements=req.n_placements, ground_extent=tuple(req.ground_extent),
            sensor_height_m=req.sensor_height_m,
            radar_noise_sigma=req.radar_noise_sigma,
            pixel_noise_sigma=req.pixel_noise_sigma,
            radar_rate_hz=req.radar_rate_hz, dwell_s=req.dwell_s,
            outlier_fraction=req.outlier_fraction, seed=req.seed,
        )
        scn = scenario.generate_scenario(params)
        truth_pixels = []
        for point in scn.true_placements:
            truth_pixels.append(project_point(scn.cam, scn.ground_truth, point))
        distances = np.array([
            float(np.hypot(px[0] - a.u, px[1] - a.v))
            for px, a in zip(truth_pixels, scn.annotations)
        ])
        mean, spread = _pair_stats(distances)
        euler = rotation_to_euler(scn.ground_truth.rotation)
        ground_truth = CalibrationModel(
            rotation=[float(v) for v in scn.ground_truth.rotation.ravel()],
            translation=[float(v) for v in scn.ground_truth.translation],
            euler_xyz=[euler.psi, euler.theta, euler.phi],
            rmse=float(np.sqrt(np.mean(distances ** 2))) if distances.size else 0.0,
            aed=mean,
            cdsd=spread if spread is not None else 0.0,
            inliers=int((distances <= 8.0).sum()),
            solver_chosen="synthetic",
            version=__version__,
            seed=req.seed,
        )
        return SimulateResponse(
            detections=[DetectionModel(timestamp_s=d.timestamp, x_m=d.x, y_m=d.y,
                                       z_m=d.z, velocity_mps=d.velocity, range_m=d.range)
                        for d in scn.detections],
            annotations=[AnnotationModel(local_ts_s=a.local_timestamp, u_px=a.u, v_px=a.v)
                         for a in scn.annotations],
            intrinsics=_camera_to_model(scn.cam),
            ground_truth=ground_truth,
            start_ts=scn.start_timestamp,
            true_placements=[[float(v) for v in p] for p in scn.true_placements],
            planted_outlier_indices=list(scn.planted_outlier_indices),
        )

    return app


app = create_app()
