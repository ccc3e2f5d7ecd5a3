"""CSV and JSON readers and writers, including failure reporting."""

import numpy as np
import pytest

import radcamcal as rc
from radcamcal import fileio
from radcamcal.errors import CsvParseError, CsvSchemaError, InputValidationError
from radcamcal.metrics import BBox
from radcamcal.pipeline import ImageAnnotation, RadarDetection


def sample_detections():
    return [
        RadarDetection(timestamp=1.5, x=5.125, y=-1.75, z=0.3, velocity=0.0),
        RadarDetection(timestamp=2.5, x=7.0, y=2.0, z=-0.6, velocity=0.0005),
        RadarDetection(timestamp=3.5, x=11.033333333333333, y=0.1, z=0.0, velocity=-0.2),
    ]


class TestRadarCsv:
    def test_round_trip_preserves_values(self, tmp_path):
        path = tmp_path / "radar.csv"
        dets = sample_detections()
        fileio.write_radar_csv(path, dets)
        back = fileio.read_radar_csv(path)
        assert len(back) == 3
        for a, b in zip(dets, back):
            assert (a.timestamp, a.x, a.y, a.z, a.velocity, a.range) == \
                   (b.timestamp, b.x, b.y, b.z, b.velocity, b.range)

    def test_range_column_is_optional(self, tmp_path):
        path = tmp_path / "radar.csv"
        path.write_text("timestamp_s,x_m,y_m,z_m,velocity_mps\n1.0,3.0,4.0,0.0,0.0\n")
        back = fileio.read_radar_csv(path)
        assert back[0].range == 5.0

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "radar.csv"
        path.write_text("timestamp_s,x_m,y_m,z_m,velocity_mps,range_m\n"
                        "1.0,3.0,4.0,0.0,0.0,5.0\n"
                        "2.0,oops,4.0,0.0,0.0,5.0\n")
        with pytest.raises(CsvParseError, match=":3:"):
            fileio.read_radar_csv(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "radar.csv"
        path.write_text("time,x,y,z,vel\n1.0,3.0,4.0,0.0,0.0\n")
        with pytest.raises(CsvSchemaError):
            fileio.read_radar_csv(path)

    def test_inconsistent_range_is_validation_error(self, tmp_path):
        path = tmp_path / "radar.csv"
        path.write_text("timestamp_s,x_m,y_m,z_m,velocity_mps,range_m\n"
                        "1.0,3.0,4.0,0.0,0.0,9.0\n")
        with pytest.raises(InputValidationError):
            fileio.read_radar_csv(path)

    def test_header_only_file_gives_empty_list(self, tmp_path):
        path = tmp_path / "radar.csv"
        path.write_text(",".join(fileio.RADAR_COLUMNS_WITH_RANGE) + "\n")
        assert fileio.read_radar_csv(path) == []

    def test_double_write_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        fileio.write_radar_csv(a, sample_detections())
        fileio.write_radar_csv(b, sample_detections())
        assert a.read_bytes() == b.read_bytes()


class TestAnnotationsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ann.csv"
        anns = [ImageAnnotation(2.0, 640.0, 360.0), ImageAnnotation(8.0, 101.25, 17.5)]
        fileio.write_annotations_csv(path, anns)
        back = fileio.read_annotations_csv(path)
        assert [(x.local_timestamp, x.u, x.v) for x in back] == \
               [(x.local_timestamp, x.u, x.v) for x in anns]

    def test_negative_pixel_is_validation_error(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("local_ts_s,u_px,v_px\n2.0,-5.0,10.0\n")
        with pytest.raises(InputValidationError, match=":2"):
            fileio.read_annotations_csv(path)


class TestBBoxCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "boxes.csv"
        boxes = [BBox(2.0, 10.0, 20.0, 30.0, 40.0),
                 BBox(8.0, 0.0, 0.0, 1280.0, 720.0),
                 BBox(14.0, 5.5, 6.5, 7.5, 8.5)]
        fileio.write_bboxes_csv(path, boxes)
        back = fileio.read_bboxes_csv(path)
        assert len(back) == 3
        for a, b in zip(boxes, back):
            assert (a.timestamp, a.min_u, a.min_v, a.max_u, a.max_v) == \
                   (b.timestamp, b.min_u, b.min_v, b.max_u, b.max_v)

    def test_inverted_box_is_validation_error(self, tmp_path):
        path = tmp_path / "boxes.csv"
        path.write_text("timestamp_s,min_u,min_v,max_u,max_v\n1.0,30.0,20.0,10.0,40.0\n")
        with pytest.raises(InputValidationError):
            fileio.read_bboxes_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "boxes.csv"
        path.write_text(",".join(fileio.BBOX_COLUMNS) + "\n")
        assert fileio.read_bboxes_csv(path) == []


class TestProjectedCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "proj.csv"
        points = [(2.0, np.array([640.0, 360.0])), (8.0, np.array([101.5, 17.25]))]
        fileio.write_projected_csv(path, points)
        back = fileio.read_projected_csv(path)
        assert len(back) == 2
        for (ta, pa), (tb, pb) in zip(points, back):
            assert ta == tb and np.array_equal(pa, pb)


class TestIntrinsicsJson:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "intr.json"
        cam = rc.default_camera()
        fileio.write_intrinsics_json(path, cam)
        back = fileio.read_intrinsics_json(path)
        assert (back.fx, back.fy, back.cx, back.cy, back.skew) == \
               (cam.fx, cam.fy, cam.cx, cam.cy, cam.skew)
        assert np.array_equal(back.dist, cam.dist)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "intr.json"
        path.write_text('{"fy": 1000.0, "cx": 640.0, "cy": 360.0}\n')
        with pytest.raises(CsvSchemaError):
            fileio.read_intrinsics_json(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "intr.json"
        path.write_text("{not json")
        with pytest.raises(CsvParseError):
            fileio.read_intrinsics_json(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "intr.json"
        cam = rc.default_camera()
        fileio.write_intrinsics_json(path, cam)
        text = path.read_text().replace("1400", "-1400", 1)
        path.write_text(text)
        with pytest.raises(InputValidationError):
            fileio.read_intrinsics_json(path)


class TestCalibrationJson:
    @staticmethod
    def record():
        return fileio.CalibrationRecord(
            rotation=list(np.eye(3).ravel()), translation=[0.0, -0.045, 0.0],
            euler_xyz=[0.0, 0.0, 0.0], rmse=0.53, aed=0.9, cdsd=0.4,
            inliers=18, solver_chosen="iterative", seed=7)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "calib.json"
        rec = self.record()
        fileio.write_calibration_json(path, rec)
        back = fileio.read_calibration_json(path)
        assert back == rec
        pose = back.pose()
        assert np.array_equal(pose.rotation, np.eye(3))
        assert np.array_equal(pose.translation, [0.0, -0.045, 0.0])

    def test_non_orthonormal_rotation(self, tmp_path):
        path = tmp_path / "calib.json"
        rec = self.record()
        rec.rotation[0] = 1.5
        fileio.write_calibration_json(path, rec)
        with pytest.raises(InputValidationError):
            fileio.read_calibration_json(path)

    def test_wrong_lengths(self, tmp_path):
        path = tmp_path / "calib.json"
        rec = self.record()
        rec.translation = [0.0, 1.0]
        fileio.write_calibration_json(path, rec)
        with pytest.raises(InputValidationError):
            fileio.read_calibration_json(path)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "calib.json"
        path.write_text('{"rotation": [1,0,0,0,1,0,0,0,1]}\n')
        with pytest.raises(CsvSchemaError):
            fileio.read_calibration_json(path)


class TestStartTs:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "start_ts.txt"
        fileio.write_start_ts(path, 1.7e9)
        assert fileio.read_start_ts(path) == 1.7e9

    def test_junk_content(self, tmp_path):
        path = tmp_path / "start_ts.txt"
        path.write_text("yesterday\n")
        with pytest.raises(CsvParseError):
            fileio.read_start_ts(path)


class TestFloatFormatting:
    def test_integral_floats_print_compactly(self):
        assert fileio.format_float(640.0) == "640"

    def test_seventeen_digit_round_trip(self):
        values = [0.1, 1.0 / 3.0, 1.7e9 + 2.0, np.pi, 5.000333333333333]
        for v in values:
            assert float(fileio.format_float(v)) == v
