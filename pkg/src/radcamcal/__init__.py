"""Radar-camera extrinsic calibration from corner-reflector recordings."""

__version__ = "0.1.0"

from .errors import (
    BehindCameraError,
    CalibrationError,
    CalibrationFailureError,
    CsvParseError,
    CsvSchemaError,
    DegenerateConfigurationError,
    DistortionInversionError,
    EmptyInputError,
    FileFormatError,
    InfeasibleScenarioError,
    InputValidationError,
    InsufficientDataError,
    InsufficientPointsError,
    InvalidStartError,
    NumericalFailureError,
    OrderingError,
    RansacFailureError,
)
from .geometry import (
    CameraModel,
    EulerXYZ,
    RigidTransform,
    apply_distortion,
    axis_angle_to_rotation,
    euler_to_rotation,
    project_point,
    rotation_to_axis_angle,
    rotation_to_euler,
    transform_point,
    undistort_point,
)
from .metrics import BBox, acc, aed, cdsd
from .optim import LmOptions, LmResult, levenberg_marquardt, numeric_jacobian, zscore
from .pipeline import (
    CalibrationResult,
    ImageAnnotation,
    PipelineOptions,
    RadarDetection,
    absolutize_timestamps,
    aggregate_window,
    associate_closest,
    build_correspondences,
    calibrate,
    static_filter,
)
from .pnp import (
    Correspondence,
    PnpSolution,
    RansacOptions,
    ransac_pnp,
    refine_all_pairs,
    reprojection_residuals,
    solve_pnp_algebraic,
    solve_pnp_iterative,
)
from .scenario import (
    Scenario,
    ScenarioParams,
    add_clutter,
    default_camera,
    generate_scenario,
    nominal_extrinsics,
)

__all__ = [name for name in dir() if not name.startswith("_")]
