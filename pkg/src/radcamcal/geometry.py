"""Rotation representations, rigid transforms, and the pinhole camera model.

Conventions: rotations are 3x3 orthonormal matrices with determinant +1.
Euler angles use the xyz sequence, R = Rz(phi) @ Ry(theta) @ Rx(psi), with
psi about x, theta about y, phi about z.  Points are plain numpy arrays;
point-valued functions accept a single point of shape (3,)/(2,) or a batch
of shape (N, 3)/(N, 2) and return the matching shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, DistortionInversionError

ROTATION_TOL = 1e-9
MIN_DEPTH = 1e-9
GIMBAL_EPS = 1e-9

# Radar axes (x forward, y left, z up, right-handed) expressed in camera
# axes (x right, y down, z forward): x_cam = -y_rad, y_cam = -z_rad,
# z_cam = x_rad.  Note the y sign: a radar frame with y to the *right*
# would be left-handed and could not map to the camera frame by a proper
# rotation at all.
RADAR_TO_CAMERA_AXES = np.array([
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
])


@dataclass
class EulerXYZ:
    """xyz Euler angles in radians: psi about x, theta about y, phi about z."""

    psi: float
    theta: float
    phi: float


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    """True if R is orthonormal with determinant +1 within tol."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0.0):
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def _require_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise ValueError("expected an orthonormal rotation matrix with det +1")
    return R


@dataclass(eq=False)
class RigidTransform:
    """Rigid motion p_out = rotation @ p_in + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = _require_rotation(self.rotation)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.translation)):
            raise ValueError("translation must be finite")

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equivalent to applying ``other`` first, then ``self``."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def matrix_3x4(self) -> np.ndarray:
        return np.hstack([self.rotation, self.translation.reshape(3, 1)])


@dataclass(eq=False)
class CameraModel:
    """Pinhole intrinsics with Brown-Conrady distortion [k1, k2, p1, p2, k3]."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    dist: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float).reshape(5)
        for name in ("fx", "fy", "cx", "cy"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not np.all(np.isfinite([self.fx, self.fy, self.cx, self.cy, self.skew])):
            raise ValueError("intrinsics must be finite")
        if not np.all(np.isfinite(self.dist)):
            raise ValueError("distortion coefficients must be finite")

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(e: EulerXYZ) -> np.ndarray:
    """Compose R = Rz(phi) @ Ry(theta) @ Rx(psi)."""
    return _rot_z(e.phi) @ _rot_y(e.theta) @ _rot_x(e.psi)


def rotation_to_euler(R) -> EulerXYZ:
    """Extract xyz Euler angles with theta in [-pi/2, pi/2].

    At gimbal lock (|cos theta| < 1e-9) psi is fixed to zero and phi absorbs
    the remaining free angle, so euler_to_rotation still reconstructs R.
    """
    R = _require_rotation(R)
    cos_theta = math.hypot(R[0, 0], R[1, 0])
    theta = math.atan2(-R[2, 0], cos_theta)
    if cos_theta < GIMBAL_EPS:
        psi = 0.0
        phi = math.atan2(-R[0, 1], R[1, 1])
    else:
        psi = math.atan2(R[2, 1], R[2, 2])
        phi = math.atan2(R[1, 0], R[0, 0])
    return EulerXYZ(psi, theta, phi)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def axis_angle_to_rotation(w) -> np.ndarray:
    """Rodrigues formula; w is axis * angle, angle = |w|."""
    w = np.asarray(w, dtype=float).reshape(3)
    theta = float(np.linalg.norm(w))
    if theta < 1e-12:
        K = _skew(w)
        return np.eye(3) + K + 0.5 * (K @ K)
    K = _skew(w / theta)
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def rotation_to_axis_angle(R) -> np.ndarray:
    """Inverse Rodrigues with canonical angle in [0, pi].

    Near angle pi the antisymmetric part vanishes, so the axis magnitudes
    come from the diagonal; signs come from the off-diagonals, with the
    largest-magnitude component made positive when the sign is otherwise free.
    """
    R = _require_rotation(R)
    cos_t = max(-1.0, min(1.0, (float(np.trace(R)) - 1.0) / 2.0))
    theta = math.acos(cos_t)
    if theta < 1e-12:
        return np.zeros(3)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < math.pi - 1e-4:
        return (theta / math.sin(theta)) * vee
    # symmetric-part extraction, stable as theta approaches pi
    k = int(np.argmax(np.diag(R)))
    axis = np.empty(3)
    axis[k] = math.sqrt(max(0.0, (R[k, k] + 1.0) / 2.0))
    for i in range(3):
        if i != k:
            axis[i] = (R[i, k] + R[k, i]) / (4.0 * axis[k])
    axis /= np.linalg.norm(axis)
    sin_t = float(np.linalg.norm(vee))
    if sin_t > 1e-9:
        if float(vee @ axis) < 0.0:
            axis = -axis
    else:
        j = int(np.argmax(np.abs(axis)))
        if axis[j] < 0.0:
            axis = -axis
    return theta * axis


def transform_point(q: RigidTransform, p) -> np.ndarray:
    """Apply q to one point (3,) or a batch (N, 3)."""
    p = np.asarray(p, dtype=float)
    return p @ q.rotation.T + q.translation


def apply_distortion(point, dist) -> np.ndarray:
    """Brown-Conrady forward distortion of normalized image coordinates."""
    pt = np.asarray(point, dtype=float)
    k1, k2, p1, p2, k3 = np.asarray(dist, dtype=float).reshape(5)
    single = pt.ndim == 1
    xy = np.atleast_2d(pt)
    x, y = xy[:, 0], xy[:, 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    out = np.stack([xd, yd], axis=1)
    return out[0] if single else out


def distortion_jacobian(point, dist) -> np.ndarray:
    """d(distorted)/d(normalized), shape (2, 2) for one point or (N, 2, 2)."""
    pt = np.asarray(point, dtype=float)
    k1, k2, p1, p2, k3 = np.asarray(dist, dtype=float).reshape(5)
    single = pt.ndim == 1
    xy = np.atleast_2d(pt)
    x, y = xy[:, 0], xy[:, 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    dradial = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r2 * r2
    jxx = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x
    jyy = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x
    jxy = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y
    J = np.empty((xy.shape[0], 2, 2))
    J[:, 0, 0] = jxx
    J[:, 0, 1] = jxy
    J[:, 1, 0] = jxy
    J[:, 1, 1] = jyy
    return J[0] if single else J


def undistort_point(point, dist, max_iters: int = 20, tol: float = 1e-10) -> np.ndarray:
    """Invert apply_distortion by Newton iteration on the 2x2 system.

    Raises DistortionInversionError if the residual has not fallen below tol
    after max_iters steps.
    """
    pt = np.asarray(point, dtype=float)
    single = pt.ndim == 1
    target = np.atleast_2d(pt).astype(float)
    x = target.copy()
    for _ in range(max_iters):
        res = apply_distortion(x, dist) - target
        if float(np.max(np.abs(res))) < tol:
            return x[0] if single else x
        J = distortion_jacobian(x, dist)
        try:
            step = np.linalg.solve(J, res[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise DistortionInversionError(
                "distortion Jacobian is singular; point outside invertible range"
            ) from exc
        x = x - step
    res = apply_distortion(x, dist) - target
    if float(np.max(np.abs(res))) < tol:
        return x[0] if single else x
    raise DistortionInversionError(
        f"undistortion did not converge within {max_iters} iterations"
    )


def normalized_to_pixel(cam: CameraModel, point) -> np.ndarray:
    """Distort normalized coordinates and map them through the intrinsics."""
    d = apply_distortion(point, cam.dist)
    single = d.ndim == 1
    d2 = np.atleast_2d(d)
    u = cam.fx * d2[:, 0] + cam.skew * d2[:, 1] + cam.cx
    v = cam.fy * d2[:, 1] + cam.cy
    out = np.stack([u, v], axis=1)
    return out[0] if single else out


def pixel_to_normalized(cam: CameraModel, pixel) -> np.ndarray:
    """Invert the intrinsics and the distortion (via undistort_point)."""
    px = np.asarray(pixel, dtype=float)
    single = px.ndim == 1
    p2 = np.atleast_2d(px)
    yd = (p2[:, 1] - cam.cy) / cam.fy
    xd = (p2[:, 0] - cam.cx - cam.skew * yd) / cam.fx
    out = undistort_point(np.stack([xd, yd], axis=1), cam.dist)
    return out[0] if single else out


def project_point(cam: CameraModel, q: RigidTransform, p) -> np.ndarray:
    """Project radar-frame point(s) to pixels through pose q and intrinsics.

    Raises BehindCameraError if any point has camera-frame depth <= 1e-9.
    """
    pc = transform_point(q, p)
    single = pc.ndim == 1
    pc2 = np.atleast_2d(pc)
    depth = pc2[:, 2]
    if np.any(depth <= MIN_DEPTH):
        raise BehindCameraError("point projects behind the camera")
    norm = pc2[:, :2] / depth[:, None]
    out = normalized_to_pixel(cam, norm)
    return out[0] if single else out
