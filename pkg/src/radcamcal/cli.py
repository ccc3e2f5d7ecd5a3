"""Command-line client for the calibration service.

Each command parses local files, posts them to the HTTP service, and writes
the response back to disk.  By default requests run against an in-process
application instance, so no server needs to be running; pass --server to
target a remote deployment instead.

Exit codes: 0 on success, 1 when the pipeline rejects the data (for example
too few usable correspondences), 2 on I/O or schema problems.
"""

from __future__ import annotations

import asyncio
import sys
from pathlib import Path

import click
import httpx

from . import __version__, fileio
from .errors import FileFormatError
from .fileio import CalibrationRecord

SERVER_OPTION = click.option(
    "--server", default=None, metavar="URL",
    help="Base URL of a running service; in-process when omitted.")


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    try:
        if server:
            with httpx.Client(base_url=server, timeout=600.0) as client:
                return client.post(path, json=payload)
        from .service import create_app
        transport = httpx.ASGITransport(app=create_app())

        async def _go():
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://service") as client:
                return await client.post(path, json=payload, timeout=600.0)

        return asyncio.run(_go())
    except httpx.HTTPError as exc:
        click.echo(f"error: request failed: {exc}", err=True)
        sys.exit(2)


def _expect_ok(response: httpx.Response) -> dict:
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
    except ValueError:
        body = {}
    if "error" in body:
        click.echo(f"error: {body.get('message', body['error'])}", err=True)
        sys.exit(1)
    click.echo(f"error: service rejected the request ({response.status_code}): "
               f"{body.get('detail', response.text)}", err=True)
    sys.exit(2)


def _read(reader, path):
    try:
        return reader(path)
    except (FileFormatError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _parse_thresholds(ctx, param, value: str):
    parts = value.split(",")
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated values, e.g. 2.0,2.0,2.0")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


@click.group()
@click.version_option(version=__version__, prog_name="radcamcal")
def main():
    """Radar-camera extrinsic calibration tools."""


@main.command()
@click.option("--radar", "radar_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Radar detections CSV.")
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Image annotations CSV.")
@click.option("--intrinsics", "intrinsics_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Camera intrinsics JSON.")
@click.option("--start-ts", required=True, type=float,
              help="Video start time on the radar clock, seconds.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output calibration JSON.")
@click.option("--seed", default=0, type=int, show_default=True,
              help="Consensus sampling seed.")
@click.option("--max-range", default=20.0, type=float, show_default=True,
              help="Keep detections closer than this range, meters.")
@click.option("--zscore-thr", default="2.0,2.0,2.0", show_default=True,
              callback=_parse_thresholds, help="Per-axis z-score gates X,Y,Z.")
@click.option("--window", default=1.0, type=float, show_default=True,
              help="Aggregation window half-width, seconds.")
@click.option("--ransac-thr", default=8.0, type=float, show_default=True,
              help="Inlier threshold, pixels.")
@SERVER_OPTION
def calibrate(radar_path, annotations_path, intrinsics_path, start_ts, out_path,
              seed, max_range, zscore_thr, window, ransac_thr, server):
    """Estimate the radar-to-camera transform from recorded data."""
    detections = _read(fileio.read_radar_csv, radar_path)
    annotations = _read(fileio.read_annotations_csv, annotations_path)
    cam = _read(fileio.read_intrinsics_json, intrinsics_path)
    payload = {
        "detections": [{"timestamp_s": d.timestamp, "x_m": d.x, "y_m": d.y, "z_m": d.z,
                        "velocity_mps": d.velocity, "range_m": d.range}
                       for d in detections],
        "annotations": [{"local_ts_s": a.local_timestamp, "u_px": a.u, "v_px": a.v}
                        for a in annotations],
        "intrinsics": {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                       "skew": cam.skew, "dist": [float(v) for v in cam.dist]},
        "start_ts": start_ts,
        "seed": seed,
        "max_range": max_range,
        "zscore_thresholds": list(zscore_thr),
        "window_half_width": window,
        "ransac_threshold": ransac_thr,
    }
    body = _expect_ok(_post(server, "/calibrate", payload))
    record = CalibrationRecord(**body["calibration"])
    try:
        fileio.write_calibration_json(out_path, record)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"RMSE={record.rmse:.4f} AED={record.aed:.4f} CDSD={record.cdsd:.4f}")
    click.echo(f"solver={record.solver_chosen} inliers={record.inliers}"
               f"/{body['correspondences_used']} -> {out_path}")


@main.command()
@click.option("--calibration", "calibration_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Calibration JSON.")
@click.option("--radar", "radar_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Radar detections CSV.")
@click.option("--intrinsics", "intrinsics_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Camera intrinsics JSON.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output projected-points CSV.")
@SERVER_OPTION
def project(calibration_path, radar_path, intrinsics_path, out_path, server):
    """Project radar detections into the image through a saved calibration."""
    record = _read(fileio.read_calibration_json, calibration_path)
    detections = _read(fileio.read_radar_csv, radar_path)
    cam = _read(fileio.read_intrinsics_json, intrinsics_path)
    payload = {
        "calibration": {
            "rotation": record.rotation, "translation": record.translation,
            "euler_xyz": record.euler_xyz, "rmse": record.rmse, "aed": record.aed,
            "cdsd": record.cdsd, "inliers": record.inliers,
            "solver_chosen": record.solver_chosen, "version": record.version,
            "seed": record.seed,
        },
        "detections": [{"timestamp_s": d.timestamp, "x_m": d.x, "y_m": d.y, "z_m": d.z,
                        "velocity_mps": d.velocity, "range_m": d.range}
                       for d in detections],
        "intrinsics": {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                       "skew": cam.skew, "dist": [float(v) for v in cam.dist]},
    }
    body = _expect_ok(_post(server, "/project", payload))
    points = [(p["timestamp_s"], (p["u_px"], p["v_px"])) for p in body["points"]]
    try:
        fileio.write_projected_csv(out_path, points)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if body["behind_camera"]:
        click.echo(f"warning: skipped {body['behind_camera']} detections behind the camera",
                   err=True)
    click.echo(f"projected {len(points)} points -> {out_path}")


@main.command()
@click.option("--projected", "projected_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Projected-points CSV.")
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Image annotations CSV.")
@click.option("--bboxes", "bboxes_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Optional bounding-box CSV for the hit-rate metric.")
@click.option("--start-ts", default=0.0, type=float, show_default=True,
              help="Offset added to annotation timestamps before matching.")
@SERVER_OPTION
def metrics(projected_path, annotations_path, bboxes_path, start_ts, server):
    """Score projected points against annotations (and optionally boxes)."""
    projected = _read(fileio.read_projected_csv, projected_path)
    annotations = _read(fileio.read_annotations_csv, annotations_path)
    payload = {
        "projected": [{"timestamp_s": ts, "u_px": float(p[0]), "v_px": float(p[1])}
                      for ts, p in projected],
        "annotations": [{"local_ts_s": a.local_timestamp, "u_px": a.u, "v_px": a.v}
                        for a in annotations],
        "start_ts": start_ts,
    }
    if bboxes_path is not None:
        boxes = _read(fileio.read_bboxes_csv, bboxes_path)
        payload["bboxes"] = [{"timestamp_s": b.timestamp, "min_u": b.min_u,
                              "min_v": b.min_v, "max_u": b.max_u, "max_v": b.max_v}
                             for b in boxes]
    body = _expect_ok(_post(server, "/metrics", payload))
    line = f"AED={body['aed']:.4f}"
    if body["cdsd"] is not None:
        line += f" CDSD={body['cdsd']:.4f}"
    if body["acc"] is not None:
        line += f" Acc={100.0 * body['acc']:.4f}%"
    click.echo(line)


@main.command()
@click.option("--out-dir", required=True, type=click.Path(file_okay=False),
              help="Directory receiving the generated files.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--n-placements", default=20, type=int, show_default=True,
              help="Number of reflector placements.")
@click.option("--tilt-deg", default=10.0, type=float, show_default=True,
              help="Downward radar pitch, degrees.")
@click.option("--baseline-m", default=0.045, type=float, show_default=True,
              help="Vertical camera offset below the radar, meters.")
@click.option("--radar-noise", default=0.02, type=float, show_default=True,
              help="Per-axis radar position noise sigma, meters.")
@click.option("--pixel-noise", default=1.0, type=float, show_default=True,
              help="Annotation pixel noise sigma.")
@click.option("--outlier-fraction", default=0.0, type=float, show_default=True,
              help="Fraction of annotations replaced by gross outliers.")
@SERVER_OPTION
def simulate(out_dir, seed, n_placements, tilt_deg, baseline_m, radar_noise,
             pixel_noise, outlier_fraction, server):
    """Generate a synthetic recording session with known ground truth."""
    payload = {
        "seed": seed, "n_placements": n_placements, "tilt_deg": tilt_deg,
        "baseline_m": baseline_m, "radar_noise_sigma": radar_noise,
        "pixel_noise_sigma": pixel_noise, "outlier_fraction": outlier_fraction,
    }
    body = _expect_ok(_post(server, "/simulate", payload))
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_scenario_files(out, body)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote scenario with {n_placements} placements to {out}")


def _write_scenario_files(out: Path, body: dict) -> None:
    from .pipeline import ImageAnnotation, RadarDetection

    detections = [RadarDetection(timestamp=d["timestamp_s"], x=d["x_m"], y=d["y_m"],
                                 z=d["z_m"], velocity=d["velocity_mps"],
                                 range=d["range_m"])
                  for d in body["detections"]]
    annotations = [ImageAnnotation(local_timestamp=a["local_ts_s"], u=a["u_px"], v=a["v_px"])
                   for a in body["annotations"]]
    fileio.write_radar_csv(out / "radar.csv", detections)
    fileio.write_annotations_csv(out / "annotations.csv", annotations)
    intr = body["intrinsics"]
    from .geometry import CameraModel
    fileio.write_intrinsics_json(out / "intrinsics.json", CameraModel(
        fx=intr["fx"], fy=intr["fy"], cx=intr["cx"], cy=intr["cy"],
        skew=intr["skew"], dist=intr["dist"]))
    fileio.write_calibration_json(out / "ground_truth.json",
                                  CalibrationRecord(**body["ground_truth"]))
    fileio.write_start_ts(out / "start_ts.txt", body["start_ts"])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the calibration HTTP service."""
    import uvicorn

    uvicorn.run("radcamcal.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
