"""
Angle, vector and orientation primitives.

Camera frame: x right, y down, z forward (depth). Yaw is measured about the
vertical axis with +z at yaw 0 and +x at yaw +pi/2; every module uses this
convention.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from headcast.src.utils.exception import HeadcastException, invalid_argument

YawAngle = float
"""Radians, wrapped to (-pi, pi]."""

TWO_PI = 2.0 * math.pi
FORWARD_AXIS = np.array([0.0, 0.0, 1.0])
HORIZONTAL_NORM_FLOOR = 1e-9
QUATERNION_NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Vec3:
    """A 3-D point or displacement in meters (camera frame)."""
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise invalid_argument("Vec3 components must be finite.", x=self.x, y=self.y, z=self.z)

    @classmethod
    def from_array(cls, values) -> "Vec3":
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first orientation quaternion, renormalised on construction."""
    qw: float
    qx: float
    qy: float
    qz: float

    def __post_init__(self):
        components = (self.qw, self.qx, self.qy, self.qz)
        if not all(math.isfinite(c) for c in components):
            raise invalid_argument("Quaternion components must be finite.", quaternion=components)
        norm = math.sqrt(sum(c * c for c in components))
        if norm == 0.0:
            raise invalid_argument("Quaternion must be non-zero.")
        if abs(norm - 1.0) > QUATERNION_NORM_TOLERANCE:
            object.__setattr__(self, "qw", self.qw / norm)
            object.__setattr__(self, "qx", self.qx / norm)
            object.__setattr__(self, "qy", self.qy / norm)
            object.__setattr__(self, "qz", self.qz / norm)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_yaw(cls, theta: float) -> "UnitQuaternion":
        """Pure rotation by theta about the vertical (+y) axis."""
        half = 0.5 * theta
        return cls(math.cos(half), 0.0, math.sin(half), 0.0)

    def norm(self) -> float:
        return math.sqrt(self.qw ** 2 + self.qx ** 2 + self.qy ** 2 + self.qz ** 2)

    def to_rotation(self) -> Rotation:
        # scipy stores quaternions scalar-last
        return Rotation.from_quat([self.qx, self.qy, self.qz, self.qw])


def wrap_angle(raw: float) -> YawAngle:
    """
    Wraps an angle into (-pi, pi].

    Raises:
        HeadcastException: InvalidArgument for a non-finite angle.
    """
    if not math.isfinite(raw):
        raise invalid_argument("Angle must be finite.", angle=raw)
    wrapped = math.pi - ((math.pi - raw) % TWO_PI)
    # the modulo can round up to 2*pi for inputs just above pi
    return wrapped + TWO_PI if wrapped <= -math.pi else wrapped


def wrap_angles(raw: np.ndarray) -> np.ndarray:
    """Vectorised wrap_angle; NaN stays NaN."""
    wrapped = math.pi - np.mod(math.pi - np.asarray(raw, dtype=float), TWO_PI)
    return np.where(wrapped <= -math.pi, wrapped + TWO_PI, wrapped)


def _yaw_of_forward(forward: np.ndarray) -> np.ndarray:
    fx, fz = forward[..., 0], forward[..., 2]
    horizontal = np.hypot(fx, fz)
    return np.where(horizontal > HORIZONTAL_NORM_FLOOR, np.arctan2(fx, fz), np.nan)


def yaw_from_quaternion(q: UnitQuaternion) -> YawAngle:
    """
    Horizontal angle of the orientation's forward (+z) axis.

    Raises:
        HeadcastException: DegenerateOrientation when the forward axis is vertical.
    """
    forward = q.to_rotation().apply(FORWARD_AXIS)
    yaw = float(_yaw_of_forward(forward))
    if math.isnan(yaw):
        raise HeadcastException(
            error=ValueError("Forward axis is vertical; yaw is undefined."),
            error_type="DegenerateOrientation",
            context={"quaternion": (q.qw, q.qx, q.qy, q.qz)},
        )
    return yaw


def yaws_from_quaternions(quaternions: np.ndarray) -> np.ndarray:
    """
    Vectorised yaw extraction for scalar-first quaternions of shape (n, 4).
    Degenerate or non-finite rows yield NaN.
    """
    quaternions = np.asarray(quaternions, dtype=float).reshape(-1, 4)
    yaws = np.full(quaternions.shape[0], np.nan)
    usable = np.all(np.isfinite(quaternions), axis=1) & (np.linalg.norm(quaternions, axis=1) > 0)
    if np.any(usable):
        scalar_last = quaternions[usable][:, [1, 2, 3, 0]]
        forward = Rotation.from_quat(scalar_last).apply(FORWARD_AXIS)
        yaws[usable] = _yaw_of_forward(forward)
    return yaws


def relative_head_yaw(nose_q: UnitQuaternion, waist_q: UnitQuaternion) -> YawAngle:
    """Head pose: yaw of the nose relative to the waist, wrapped to (-pi, pi]."""
    return wrap_angle(yaw_from_quaternion(nose_q) - yaw_from_quaternion(waist_q))


def rotate_yaw_xyz(vectors: np.ndarray, theta) -> np.ndarray:
    """
    Rotates (..., 3) vectors about the vertical axis; y is untouched.
    theta broadcasts against the leading dimensions.
    """
    vectors = np.asarray(vectors, dtype=float)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    x = vectors[..., 0]
    z = vectors[..., 2]
    rotated = np.empty(np.broadcast_shapes(vectors.shape, np.shape(cos_t) + (3,)))
    rotated[..., 0] = x * cos_t + z * sin_t
    rotated[..., 1] = vectors[..., 1]
    rotated[..., 2] = -x * sin_t + z * cos_t
    return rotated


def rotate_yaw(v: Vec3, theta: YawAngle) -> Vec3:
    """Rotates v by theta in the horizontal plane so that +z turns toward +x."""
    return Vec3.from_array(rotate_yaw_xyz(v.to_array(), theta))
