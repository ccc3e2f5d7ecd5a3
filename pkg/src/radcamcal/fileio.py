"""CSV and JSON readers/writers for the on-disk interchange formats.

Floats are written round-trip exact: 17 significant digits in CSV and text
files, shortest exact representation in JSON.  Readers validate headers and
values and report the offending line number where applicable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .errors import CsvParseError, CsvSchemaError, InputValidationError
from .geometry import CameraModel, RigidTransform, is_rotation
from .metrics import BBox
from .pipeline import ImageAnnotation, RadarDetection

RADAR_COLUMNS = ["timestamp_s", "x_m", "y_m", "z_m", "velocity_mps"]
RADAR_COLUMNS_WITH_RANGE = RADAR_COLUMNS + ["range_m"]
ANNOTATION_COLUMNS = ["local_ts_s", "u_px", "v_px"]
BBOX_COLUMNS = ["timestamp_s", "min_u", "min_v", "max_u", "max_v"]
PROJECTED_COLUMNS = ["timestamp_s", "u_px", "v_px"]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _read_rows(path, expected_headers):
    """Yield (line_number, row) after validating the header.

    expected_headers is a list of acceptable header layouts; the index of the
    matching layout is returned alongside the row iterator.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvSchemaError(f"{path}: empty file, expected a header row")
    header = [c.strip() for c in rows[0]]
    for which, columns in enumerate(expected_headers):
        if header == columns:
            break
    else:
        raise CsvSchemaError(
            f"{path}: header {header} does not match required columns "
            f"{' or '.join(','.join(h) for h in expected_headers)}"
        )
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(expected_headers[which]):
            raise CsvParseError(
                f"{path}:{lineno}: expected {len(expected_headers[which])} fields, got {len(row)}"
            )
        try:
            out.append((lineno, [float(v) for v in row]))
        except ValueError as exc:
            raise CsvParseError(f"{path}:{lineno}: {exc}") from exc
    return which, out


def read_radar_csv(path) -> list[RadarDetection]:
    which, rows = _read_rows(path, [RADAR_COLUMNS, RADAR_COLUMNS_WITH_RANGE])
    detections = []
    for lineno, values in rows:
        rng = values[5] if which == 1 else None
        try:
            detections.append(RadarDetection(
                timestamp=values[0], x=values[1], y=values[2], z=values[3],
                velocity=values[4], range=rng,
            ))
        except ValueError as exc:
            raise InputValidationError(f"{path}:{lineno}: {exc}") from exc
    return detections


def write_radar_csv(path, detections, include_range: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RADAR_COLUMNS_WITH_RANGE if include_range else RADAR_COLUMNS)
        for d in detections:
            row = [d.timestamp, d.x, d.y, d.z, d.velocity]
            if include_range:
                row.append(d.range)
            writer.writerow([format_float(v) for v in row])


def read_annotations_csv(path) -> list[ImageAnnotation]:
    _, rows = _read_rows(path, [ANNOTATION_COLUMNS])
    annotations = []
    for lineno, values in rows:
        try:
            annotations.append(ImageAnnotation(local_timestamp=values[0],
                                               u=values[1], v=values[2]))
        except ValueError as exc:
            raise InputValidationError(f"{path}:{lineno}: {exc}") from exc
    return annotations


def write_annotations_csv(path, annotations) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANNOTATION_COLUMNS)
        for a in annotations:
            writer.writerow([format_float(v) for v in (a.local_timestamp, a.u, a.v)])


def read_bboxes_csv(path) -> list[BBox]:
    _, rows = _read_rows(path, [BBOX_COLUMNS])
    boxes = []
    for lineno, values in rows:
        try:
            boxes.append(BBox(*values))
        except ValueError as exc:
            raise InputValidationError(f"{path}:{lineno}: {exc}") from exc
    return boxes


def write_bboxes_csv(path, boxes) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BBOX_COLUMNS)
        for b in boxes:
            writer.writerow([format_float(v) for v in
                             (b.timestamp, b.min_u, b.min_v, b.max_u, b.max_v)])


def read_projected_csv(path) -> list[tuple[float, np.ndarray]]:
    _, rows = _read_rows(path, [PROJECTED_COLUMNS])
    return [(values[0], np.array([values[1], values[2]])) for _, values in rows]


def write_projected_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROJECTED_COLUMNS)
        for ts, pixel in points:
            writer.writerow([format_float(ts), format_float(pixel[0]), format_float(pixel[1])])


def read_intrinsics_json(path) -> CameraModel:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CsvParseError(f"{path}: {exc}") from exc
    try:
        return CameraModel(
            fx=float(data["fx"]), fy=float(data["fy"]),
            cx=float(data["cx"]), cy=float(data["cy"]),
            skew=float(data.get("skew", 0.0)),
            dist=[float(v) for v in data.get("dist", [0.0] * 5)],
        )
    except KeyError as exc:
        raise CsvSchemaError(f"{path}: missing intrinsics field {exc}") from exc
    except ValueError as exc:
        raise InputValidationError(f"{path}: {exc}") from exc


def write_intrinsics_json(path, cam: CameraModel) -> None:
    data = {
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "skew": cam.skew, "dist": [float(v) for v in cam.dist],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


@dataclass
class CalibrationRecord:
    """On-disk calibration result: pose, its Euler split, and fit statistics."""

    rotation: list
    translation: list
    euler_xyz: list
    rmse: float
    aed: float
    cdsd: float
    inliers: int
    solver_chosen: str
    version: str = __version__
    seed: int = 0

    def pose(self) -> RigidTransform:
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        return RigidTransform(R, np.asarray(self.translation, dtype=float))


def read_calibration_json(path) -> CalibrationRecord:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CsvParseError(f"{path}: {exc}") from exc
    try:
        record = CalibrationRecord(
            rotation=[float(v) for v in data["rotation"]],
            translation=[float(v) for v in data["translation"]],
            euler_xyz=[float(v) for v in data["euler_xyz"]],
            rmse=float(data["rmse"]), aed=float(data["aed"]), cdsd=float(data["cdsd"]),
            inliers=int(data["inliers"]), solver_chosen=str(data["solver_chosen"]),
            version=str(data["version"]), seed=int(data["seed"]),
        )
    except KeyError as exc:
        raise CsvSchemaError(f"{path}: missing calibration field {exc}") from exc
    if len(record.rotation) != 9 or len(record.translation) != 3 or len(record.euler_xyz) != 3:
        raise InputValidationError(f"{path}: rotation/translation/euler have wrong lengths")
    R = np.asarray(record.rotation).reshape(3, 3)
    if not is_rotation(R, tol=1e-6):
        raise InputValidationError(f"{path}: rotation matrix is not orthonormal")
    return record


def write_calibration_json(path, record: CalibrationRecord) -> None:
    data = {
        "rotation": [float(v) for v in record.rotation],
        "translation": [float(v) for v in record.translation],
        "euler_xyz": [float(v) for v in record.euler_xyz],
        "rmse": float(record.rmse),
        "aed": float(record.aed),
        "cdsd": float(record.cdsd),
        "inliers": int(record.inliers),
        "solver_chosen": str(record.solver_chosen),
        "version": str(record.version),
        "seed": int(record.seed),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def read_start_ts(path) -> float:
    with open(path) as fh:
        text = fh.read().strip()
    try:
        return float(text)
    except ValueError as exc:
        raise CsvParseError(f"{path}: not a timestamp: {text!r}") from exc


def write_start_ts(path, value: float) -> None:
    with open(path, "w") as fh:
        fh.write(format_float(value) + "\n")
