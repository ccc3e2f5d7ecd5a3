"""Exception types shared across the package.

Every domain error carries a short machine-readable ``code`` so the HTTP
service can report it without string matching on messages.
"""


class CalibrationError(Exception):
    """Base class for all calibration-domain failures."""

    code = "calibration-error"


class EmptyInputError(CalibrationError):
    code = "empty-input"


class OrderingError(CalibrationError):
    """Input that must be sorted by timestamp is not."""

    code = "unsorted-input"


class InsufficientPointsError(CalibrationError):
    """Too few correspondences for the requested solver."""

    code = "insufficient-points"


class InsufficientDataError(CalibrationError):
    """Too few usable correspondences survived the data association stage."""

    code = "insufficient-data"


class BehindCameraError(CalibrationError):
    """Point has non-positive depth in the camera frame."""

    code = "behind-camera"


class DistortionInversionError(CalibrationError):
    """Undistortion failed to converge."""

    code = "inversion-failure"


class InvalidStartError(CalibrationError):
    """Optimizer start point produced a non-finite residual."""

    code = "invalid-start"


class NumericalFailureError(CalibrationError):
    """Normal equations stayed singular after damping escalation."""

    code = "numerical-failure"


class DegenerateConfigurationError(CalibrationError):
    """Point configuration does not determine a unique pose."""

    code = "degenerate-configuration"


class RansacFailureError(CalibrationError):
    """No sampled model reached the required consensus."""

    code = "ransac-failure"


class CalibrationFailureError(CalibrationError):
    """Every solver route failed; carries the per-route causes."""

    code = "calibration-failure"

    def __init__(self, message, causes=None):
        super().__init__(message)
        self.causes = dict(causes or {})


class InfeasibleScenarioError(CalibrationError):
    """Scenario generator could not place a target inside the image."""

    code = "infeasible-scenario"


class FileFormatError(Exception):
    """Base class for file reading problems (bad schema, bad row, bad value)."""


class CsvSchemaError(FileFormatError):
    """Header row does not match the expected column set."""


class CsvParseError(FileFormatError):
    """A data row could not be parsed; message includes the line number."""


class InputValidationError(FileFormatError):
    """A parsed value violates a file-level invariant."""
