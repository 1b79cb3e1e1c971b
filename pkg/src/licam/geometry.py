"""Rigid-transform algebra, camera projection, and analytic Jacobians.

Conventions used throughout the package:

* The extrinsic maps LiDAR-frame points into the camera frame,
  ``P_cam = R @ P_lidar + t``.
* Solver updates are applied as ``T <- exp(delta) o T`` with the 6-vector
  ``delta`` ordered ``[rotation | translation]``.  The reprojection Jacobian
  below is the derivative of the projected pixel with respect to exactly that
  perturbation, which makes it a function of the camera-frame point alone.
* ``TangentVector`` keeps the two blocks as named fields, so no caller has to
  remember the stacking order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PointBehindCamera

MIN_DEPTH = 1e-9
_SMALL_ANGLE = 1e-8


def skew(v) -> np.ndarray:
    """3x3 cross-product matrix of a 3-vector."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _skew_many(vs: np.ndarray) -> np.ndarray:
    """(N,3) -> (N,3,3) stack of cross-product matrices."""
    n = vs.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = -vs[:, 2]
    out[:, 0, 2] = vs[:, 1]
    out[:, 1, 0] = vs[:, 2]
    out[:, 1, 2] = -vs[:, 0]
    out[:, 2, 0] = -vs[:, 1]
    out[:, 2, 1] = vs[:, 0]
    return out


def _as_float_array(x, shape, name):
    a = np.asarray(x, dtype=float)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class Pixel:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"pixel coordinates must be finite, got ({self.u}, {self.v})")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True, eq=False)
class TangentVector:
    """se(3) element with translation part ``rho`` and rotation part ``phi``."""

    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _as_float_array(self.rho, (3,), "rho"))
        object.__setattr__(self, "phi", _as_float_array(self.phi, (3,), "phi"))

    @classmethod
    def zero(cls) -> "TangentVector":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation + translation; immutable once constructed."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _as_float_array(self.rotation, (3, 3), "rotation")
        t = _as_float_array(self.translation, (3,), "translation")
        r = r.copy()
        t = t.copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = _as_float_array(m, (4, 4), "matrix")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or an (N,3) batch."""
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera with 5-coefficient radial-tangential distortion.

    ``distortion = (k1, k2, p1, p2, k3)``; all zeros means the input imagery
    is already rectified and projection is pure pinhole.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(5))
    width: int = 640
    height: int = 480

    def __post_init__(self):
        d = _as_float_array(self.distortion, (5,), "distortion").copy()
        d.flags.writeable = False
        object.__setattr__(self, "distortion", d)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def has_distortion(self) -> bool:
        return bool(np.any(self.distortion != 0.0))


def transform_point(transform: RigidTransform, point) -> np.ndarray:
    """R @ P + t for a single point."""
    return transform.apply(np.asarray(point, dtype=float))


def rotation_angle(rotation: np.ndarray) -> float:
    """Rotation angle in radians, in [0, pi]."""
    c = (np.trace(rotation) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def pose_difference(a: RigidTransform, b: RigidTransform) -> tuple[float, float]:
    """(rotation angle [rad], translation distance [m]) between two transforms."""
    return (
        rotation_angle(a.rotation @ b.rotation.T),
        float(np.linalg.norm(a.translation - b.translation)),
    )


# --- so(3)/se(3) exponential and logarithm -------------------------------------------------

def so3_exp(phi) -> np.ndarray:
    """Rodrigues formula with a Taylor branch below the small-angle cutoff."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
    return np.eye(3) + a * k + b * (k @ k)


def _quaternion_from_rotation(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) via Shepperd's branch selection."""
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > max(r[0, 0], r[1, 1], r[2, 2]):
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def so3_log(rotation: np.ndarray) -> np.ndarray:
    """Rotation vector of an orthonormal matrix; stable near 0 and pi."""
    q = _quaternion_from_rotation(np.asarray(rotation, dtype=float))
    sin_half = float(np.linalg.norm(q[1:]))
    if sin_half < _SMALL_ANGLE:
        scale = 2.0 + sin_half**2 / 3.0
    else:
        scale = 2.0 * math.atan2(sin_half, q[0]) / sin_half
    return scale * q[1:]


def _left_jacobian(phi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        b = 0.5 - theta**2 / 24.0
        c = 1.0 / 6.0 - theta**2 / 120.0
    else:
        b = (1.0 - math.cos(theta)) / theta**2
        c = (theta - math.sin(theta)) / theta**3
    return np.eye(3) + b * k + c * (k @ k)


def _left_jacobian_inverse(phi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        coef = 1.0 / 12.0 + theta**2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
        coef = (1.0 - a / (2.0 * b)) / theta**2
    return np.eye(3) - 0.5 * k + coef * (k @ k)


def se3_exp(xi: TangentVector) -> RigidTransform:
    """Closed-form exponential map se(3) -> SE(3)."""
    rotation = so3_exp(xi.phi)
    translation = _left_jacobian(xi.phi) @ xi.rho
    return RigidTransform(rotation, translation)


def se3_log(transform: RigidTransform) -> TangentVector:
    """Inverse of :func:`se3_exp`; valid for rotation angles below pi."""
    phi = so3_log(transform.rotation)
    rho = _left_jacobian_inverse(phi) @ transform.translation
    return TangentVector(rho=rho, phi=phi)


# --- projection and distortion --------------------------------------------------------------

def distort_normalized(cam: CameraModel, xy) -> np.ndarray:
    """Apply radial-tangential distortion to normalized coordinates (..., 2)."""
    xy = np.asarray(xy, dtype=float)
    k1, k2, p1, p2, k3 = cam.distortion
    x = xy[..., 0]
    y = xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def distortion_jacobian(cam: CameraModel, xy) -> np.ndarray:
    """d(distorted)/d(normalized), shape (..., 2, 2)."""
    xy = np.asarray(xy, dtype=float)
    k1, k2, p1, p2, k3 = cam.distortion
    x = xy[..., 0]
    y = xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2)  # d(radial)/d(r2)
    jxx = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x
    jxy = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y
    jyy = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x
    out = np.empty(xy.shape[:-1] + (2, 2))
    out[..., 0, 0] = jxx
    out[..., 0, 1] = jxy
    out[..., 1, 0] = jxy
    out[..., 1, 1] = jyy
    return out


def undistort_normalized(cam: CameraModel, xy_distorted, iterations: int = 20) -> np.ndarray:
    """Invert the distortion model by Newton iteration (identity for zero coefficients)."""
    target = np.asarray(xy_distorted, dtype=float)
    if not cam.has_distortion:
        return target.copy()
    xy = target.copy()
    for _ in range(iterations):
        err = distort_normalized(cam, xy) - target
        j = distortion_jacobian(cam, xy)
        det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        dx = (j[..., 1, 1] * err[..., 0] - j[..., 0, 1] * err[..., 1]) / det
        dy = (-j[..., 1, 0] * err[..., 0] + j[..., 0, 0] * err[..., 1]) / det
        xy = xy - np.stack([dx, dy], axis=-1)
        if np.max(np.abs(err)) < 1e-14:
            break
    return xy


def project(cam: CameraModel, p_cam) -> Pixel:
    """Pinhole division, distortion, then pixel scaling.

    Raises :class:`PointBehindCamera` when the depth is at or below 1e-9.
    """
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= MIN_DEPTH:
        raise PointBehindCamera(f"point depth {p[2]:.3g} is not in front of the camera")
    xy = p[:2] / p[2]
    xd, yd = distort_normalized(cam, xy)
    return Pixel(cam.fx * xd + cam.cx, cam.fy * yd + cam.cy)


def project_points(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N,3) camera-frame points.

    Returns (pixels (N,2), valid (N,)); rows with depth <= 1e-9 are NaN and
    flagged invalid instead of raising.
    """
    pts = np.asarray(points, dtype=float)
    valid = pts[:, 2] > MIN_DEPTH
    z = np.where(valid, pts[:, 2], 1.0)
    xy = pts[:, :2] / z[:, None]
    xyd = distort_normalized(cam, xy)
    px = np.empty_like(xyd)
    px[:, 0] = cam.fx * xyd[:, 0] + cam.cx
    px[:, 1] = cam.fy * xyd[:, 1] + cam.cy
    px[~valid] = np.nan
    return px, valid


def pixel_to_bearing(cam: CameraModel, pixels: np.ndarray) -> np.ndarray:
    """(N,2) pixels -> (N,3) unit bearing vectors in the camera frame."""
    px = np.asarray(pixels, dtype=float)
    xy = np.stack([(px[:, 0] - cam.cx) / cam.fx, (px[:, 1] - cam.cy) / cam.fy], axis=-1)
    xy = undistort_normalized(cam, xy)
    vec = np.concatenate([xy, np.ones((len(xy), 1))], axis=1)
    return vec / np.linalg.norm(vec, axis=1, keepdims=True)


def projection_jacobian_point(cam: CameraModel, p_cam) -> np.ndarray:
    """d(pixel)/d(P_cam), shape (2,3), distortion chained in."""
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= MIN_DEPTH:
        raise PointBehindCamera(f"point depth {p[2]:.3g} is not in front of the camera")
    x, y, z = p
    dpi = np.array([[1.0 / z, 0.0, -x / z**2], [0.0, 1.0 / z, -y / z**2]])
    df = distortion_jacobian(cam, np.array([x / z, y / z]))
    a = df @ dpi
    a[0] *= cam.fx
    a[1] *= cam.fy
    return a


def reprojection_jacobian(cam: CameraModel, p_cam) -> np.ndarray:
    """2x6 pixel Jacobian [d/d(rotation) | d/d(translation)] at a camera-frame point.

    The columns correspond to the update ``T <- exp(delta) o T``; with zero
    distortion the entries reduce to the familiar closed form, e.g.
    du/dphi_y = fx + fx*X^2/Z^2.
    """
    p = np.asarray(p_cam, dtype=float)
    a = projection_jacobian_point(cam, p)
    return np.concatenate([a @ (-skew(p)), a], axis=1)


def reprojection_jacobians(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (N,2,6) version of :func:`reprojection_jacobian` with a validity mask."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    valid = pts[:, 2] > MIN_DEPTH
    z = np.where(valid, pts[:, 2], 1.0)
    x = pts[:, 0]
    y = pts[:, 1]
    dpi = np.zeros((n, 2, 3))
    dpi[:, 0, 0] = 1.0 / z
    dpi[:, 0, 2] = -x / z**2
    dpi[:, 1, 1] = 1.0 / z
    dpi[:, 1, 2] = -y / z**2
    xy = np.stack([x / z, y / z], axis=-1)
    a = distortion_jacobian(cam, xy) @ dpi
    a[:, 0, :] *= cam.fx
    a[:, 1, :] *= cam.fy
    jr = -np.einsum("nij,njk->nik", a, _skew_many(pts))
    jac = np.concatenate([jr, a], axis=2)
    jac[~valid] = np.nan
    return jac, valid
