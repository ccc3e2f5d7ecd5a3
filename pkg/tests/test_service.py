"""HTTP endpoints: calibrate, project, metrics, simulate, error mapping."""

import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

import radcamcal as rc
from radcamcal import __version__
from radcamcal.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def scenario_payload(scn, **overrides):
    body = {
        "detections": [{"timestamp_s": d.timestamp, "x_m": d.x, "y_m": d.y,
                        "z_m": d.z, "velocity_mps": d.velocity, "range_m": d.range}
                       for d in scn.detections],
        "annotations": [{"local_ts_s": a.local_timestamp, "u_px": a.u, "v_px": a.v}
                        for a in scn.annotations],
        "intrinsics": {"fx": scn.cam.fx, "fy": scn.cam.fy, "cx": scn.cam.cx,
                       "cy": scn.cam.cy, "skew": scn.cam.skew,
                       "dist": [float(v) for v in scn.cam.dist]},
        "start_ts": scn.start_timestamp,
    }
    body.update(overrides)
    return body


def identity_calibration():
    return {"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [0, 0, 0],
            "euler_xyz": [0, 0, 0], "rmse": 0.0, "aed": 0.0, "cdsd": 0.0,
            "inliers": 0, "solver_chosen": "manual", "version": __version__,
            "seed": 0}


def plain_intrinsics():
    return {"fx": 1000.0, "fy": 1000.0, "cx": 640.0, "cy": 360.0}


class TestHealth:
    def test_reports_version(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestCalibrate:
    def test_zero_noise_recovery(self, client):
        scn = rc.generate_scenario(rc.ScenarioParams(
            seed=11, n_placements=8, radar_noise_sigma=0.0, pixel_noise_sigma=0.0))
        resp = client.post("/calibrate", json=scenario_payload(scn))
        assert resp.status_code == 200
        body = resp.json()
        R = np.asarray(body["calibration"]["rotation"]).reshape(3, 3)
        t = np.asarray(body["calibration"]["translation"])
        assert np.max(np.abs(R - scn.ground_truth.rotation)) < 1e-6
        assert np.max(np.abs(t - scn.ground_truth.translation)) < 1e-6
        assert body["correspondences_used"] == 8
        assert all(body["inlier_mask"])
        assert len(body["per_pair_error_px"]) == 8
        assert body["calibration"]["solver_chosen"] in ("iterative", "algebraic")
        assert body["calibration"]["version"] == __version__

    def test_domain_failure_maps_to_error_code(self, client):
        scn = rc.generate_scenario(rc.ScenarioParams(seed=11, n_placements=3))
        resp = client.post("/calibrate", json=scenario_payload(scn))
        assert resp.status_code == 422
        body = resp.json()
        assert body["error"] == "insufficient-data"
        assert "message" in body

    def test_malformed_body_uses_fastapi_validation(self, client):
        scn = rc.generate_scenario(rc.ScenarioParams(seed=11, n_placements=4))
        payload = scenario_payload(scn)
        del payload["intrinsics"]["fx"]
        resp = client.post("/calibrate", json=payload)
        assert resp.status_code == 422
        body = resp.json()
        assert "detail" in body and "error" not in body

    def test_bad_option_values_map_to_invalid_input(self, client):
        scn = rc.generate_scenario(rc.ScenarioParams(seed=11, n_placements=4))
        payload = scenario_payload(scn, zscore_thresholds=(2.0, -1.0, 2.0))
        resp = client.post("/calibrate", json=payload)
        assert resp.status_code == 422
        assert resp.json()["error"] == "invalid-input"


class TestProject:
    def test_point_on_optical_axis(self, client):
        resp = client.post("/project", json={
            "calibration": identity_calibration(),
            "detections": [{"timestamp_s": 1.0, "x_m": 0.0, "y_m": 0.0, "z_m": 5.0,
                            "velocity_mps": 0.0}],
            "intrinsics": plain_intrinsics(),
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["behind_camera"] == 0
        assert body["points"] == [{"timestamp_s": 1.0, "u_px": 640.0, "v_px": 360.0}]

    def test_behind_camera_points_are_counted_not_projected(self, client):
        resp = client.post("/project", json={
            "calibration": identity_calibration(),
            "detections": [
                {"timestamp_s": 1.0, "x_m": 0.0, "y_m": 0.0, "z_m": 5.0,
                 "velocity_mps": 0.0},
                {"timestamp_s": 2.0, "x_m": 0.0, "y_m": 0.0, "z_m": -1.0,
                 "velocity_mps": 0.0},
            ],
            "intrinsics": plain_intrinsics(),
        })
        body = resp.json()
        assert body["behind_camera"] == 1
        assert len(body["points"]) == 1
        assert body["points"][0]["timestamp_s"] == 1.0


class TestMetrics:
    @staticmethod
    def fixture_payload(**overrides):
        body = {
            "projected": [
                {"timestamp_s": 2.0, "u_px": 3.0, "v_px": 4.0},
                {"timestamp_s": 8.0, "u_px": 15.0, "v_px": 22.0},
            ],
            "annotations": [
                {"local_ts_s": 2.0, "u_px": 0.0, "v_px": 0.0},
                {"local_ts_s": 8.0, "u_px": 10.0, "v_px": 10.0},
            ],
        }
        body.update(overrides)
        return body

    def test_mean_and_spread(self, client):
        resp = client.post("/metrics", json=self.fixture_payload())
        assert resp.status_code == 200
        body = resp.json()
        assert body["aed"] == 9.0
        assert abs(body["cdsd"] - math.sqrt(32.0)) < 1e-12
        assert body["acc"] is None
        assert body["pairs"] == 2

    def test_start_ts_moves_annotations_onto_the_radar_clock(self, client):
        shifted = self.fixture_payload()
        for pt in shifted["projected"]:
            pt["timestamp_s"] += 1000.0
        resp = client.post("/metrics", json=shifted)
        assert resp.status_code == 422
        assert resp.json()["error"] == "empty-input"
        shifted["start_ts"] = 1000.0
        resp = client.post("/metrics", json=shifted)
        assert resp.status_code == 200
        assert resp.json()["pairs"] == 2

    def test_hit_rate_with_boxes(self, client):
        projected = [{"timestamp_s": float(k), "u_px": 100.0, "v_px": 100.0}
                     for k in range(9)]
        projected.append({"timestamp_s": 9.0, "u_px": 500.0, "v_px": 500.0})
        annotations = [{"local_ts_s": float(k), "u_px": 101.0, "v_px": 99.0}
                       for k in range(10)]
        bboxes = [{"timestamp_s": float(k), "min_u": 90.0, "min_v": 90.0,
                   "max_u": 110.0, "max_v": 110.0} for k in range(10)]
        resp = client.post("/metrics", json={"projected": projected,
                                             "annotations": annotations,
                                             "bboxes": bboxes})
        assert resp.status_code == 200
        assert resp.json()["acc"] == 0.9

    def test_empty_projected_rejected(self, client):
        resp = client.post("/metrics", json=self.fixture_payload(projected=[]))
        assert resp.status_code == 422
        assert resp.json()["error"] == "empty-input"


class TestSimulate:
    def test_deterministic_and_faithful(self, client):
        req = {"seed": 13, "n_placements": 6}
        a = client.post("/simulate", json=req)
        b = client.post("/simulate", json=req)
        assert a.status_code == 200
        assert a.json() == b.json()
        body = a.json()
        assert body["start_ts"] == 1.7e9
        assert len(body["annotations"]) == 6
        assert len(body["detections"]) == 6 * 40
        assert len(body["true_placements"]) == 6
        nominal = rc.nominal_extrinsics(0.0, 0.045)
        R = np.asarray(body["ground_truth"]["rotation"]).reshape(3, 3)
        assert np.array_equal(R, nominal.rotation)
        assert body["ground_truth"]["solver_chosen"] == "synthetic"

    def test_outlier_planting_reported(self, client):
        resp = client.post("/simulate", json={"seed": 5, "outlier_fraction": 0.3})
        body = resp.json()
        assert len(body["planted_outlier_indices"]) == 6

    def test_response_feeds_back_into_calibrate(self, client):
        sim = client.post("/simulate", json={"seed": 21, "n_placements": 10,
                                             "radar_noise_sigma": 0.0,
                                             "pixel_noise_sigma": 0.0}).json()
        resp = client.post("/calibrate", json={
            "detections": sim["detections"],
            "annotations": sim["annotations"],
            "intrinsics": sim["intrinsics"],
            "start_ts": sim["start_ts"],
        })
        assert resp.status_code == 200
        R = np.asarray(resp.json()["calibration"]["rotation"]).reshape(3, 3)
        truth = np.asarray(sim["ground_truth"]["rotation"]).reshape(3, 3)
        assert np.max(np.abs(R - truth)) < 1e-6
