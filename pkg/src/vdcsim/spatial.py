"""Frame-tagged 6D spatial vectors and the rigid transforms between them.

Velocities are ordered ``[v, w]`` (linear first) and forces ``[f, m]``.
A :class:`FrameTransform` describes the pose of frame ``to_frame`` as seen
from ``from_frame``; its 6x6 matrix ``U`` maps forces from ``to_frame`` into
``from_frame`` and its transpose maps velocities the other way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FrameId = str

ORTHONORMAL_TOL = 1e-9


class FrameMismatchError(ValueError):
    """Raised when a vector is combined with a transform of another frame."""


def skew(r) -> np.ndarray:
    """Cross-product matrix: ``skew(r) @ x == np.cross(r, x)``."""
    x, y, z = r
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a, b) -> np.ndarray:
    """``np.cross`` for single 3-vectors without its broadcasting overhead."""
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def check_rotation(R, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError("rotation has non-finite entries")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("rotation is not orthonormal with determinant +1")
    return R


def axis_rotation(axis: int, angle: float) -> np.ndarray:
    """Rotation about coordinate axis 0 (x), 1 (y) or 2 (z)."""
    c, s = math.cos(angle), math.sin(angle)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == 2:
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"axis index must be 0, 1 or 2, got {axis}")


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw, ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return axis_rotation(2, yaw) @ axis_rotation(1, pitch) @ axis_rotation(0, roll)


def _finite3(name, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr


@dataclass(frozen=True)
class SpatialVelocity:
    linear: np.ndarray
    angular: np.ndarray
    frame: FrameId

    def __post_init__(self):
        object.__setattr__(self, "linear", _finite3("linear", self.linear))
        object.__setattr__(self, "angular", _finite3("angular", self.angular))

    @classmethod
    def from_vector(cls, vec, frame: FrameId) -> "SpatialVelocity":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], vec[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True)
class SpatialForce:
    force: np.ndarray
    moment: np.ndarray
    frame: FrameId

    def __post_init__(self):
        object.__setattr__(self, "force", _finite3("force", self.force))
        object.__setattr__(self, "moment", _finite3("moment", self.moment))

    @classmethod
    def from_vector(cls, vec, frame: FrameId) -> "SpatialForce":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], vec[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])


@dataclass(frozen=True)
class FrameTransform:
    """Pose of ``to_frame`` expressed in ``from_frame``.

    ``rotation`` maps ``to_frame`` coordinates into ``from_frame`` coordinates
    and ``offset`` is the origin of ``to_frame`` in ``from_frame``.
    """

    rotation: np.ndarray
    offset: np.ndarray
    from_frame: FrameId
    to_frame: FrameId
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "offset", _finite3("offset", self.offset))
        object.__setattr__(self, "_matrix", _block(self.rotation, self.offset))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def compose(self, other: "FrameTransform") -> "FrameTransform":
        """``self`` (A->B) followed by ``other`` (B->C) gives A->C."""
        if other.from_frame != self.to_frame:
            raise FrameMismatchError(
                f"cannot chain {self.from_frame}->{self.to_frame} with "
                f"{other.from_frame}->{other.to_frame}"
            )
        return FrameTransform(
            self.rotation @ other.rotation,
            self.offset + self.rotation @ other.offset,
            self.from_frame,
            other.to_frame,
        )

    def inverse(self) -> "FrameTransform":
        Rt = self.rotation.T
        return FrameTransform(Rt, -Rt @ self.offset, self.to_frame, self.from_frame)


def _block(R: np.ndarray, r: np.ndarray) -> np.ndarray:
    U = np.zeros((6, 6))
    U[:3, :3] = R
    U[3:, 3:] = R
    U[3:, :3] = skew(r) @ R
    return U


def build_transform(t: FrameTransform) -> np.ndarray:
    """6x6 matrix ``[[R, 0], [skew(r) R, R]]``."""
    return t.matrix.copy()


def transform_velocity(t: FrameTransform, v: SpatialVelocity) -> SpatialVelocity:
    """Re-express a velocity given in ``t.from_frame`` at ``t.to_frame`` (uses ``U^T``)."""
    if v.frame != t.from_frame:
        raise FrameMismatchError(f"velocity in {v.frame}, transform expects {t.from_frame}")
    return SpatialVelocity.from_vector(t.matrix.T @ v.vector, t.to_frame)


def transform_force(t: FrameTransform, f: SpatialForce) -> SpatialForce:
    """Re-express a force given in ``t.to_frame`` at ``t.from_frame`` (uses ``U``)."""
    if f.frame != t.to_frame:
        raise FrameMismatchError(f"force in {f.frame}, transform expects {t.to_frame}")
    return SpatialForce.from_vector(t.matrix @ f.vector, t.from_frame)


# -- quaternions -------------------------------------------------------------


@dataclass(frozen=True)
class UnitQuaternion:
    """Hamilton quaternion ``w + xi + yj + zk``, normalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or n == 0.0:
            raise ValueError("quaternion must be finite and non-zero")
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)) / n)

    @classmethod
    def from_array(cls, a) -> "UnitQuaternion":
        return cls(*np.asarray(a, dtype=float).reshape(4))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(angle / 2.0)
        return cls(math.cos(angle / 2.0), *(s * axis))

    @classmethod
    def from_matrix(cls, R) -> "UnitQuaternion":
        return cls(*matrix_to_quat(np.asarray(R, dtype=float)))

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion(*quat_multiply(self.as_array(), other.as_array()))

    def to_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.as_array())


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns ``[w, x, y, z]`` with ``w >= 0``."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0.0 else q


def quat_error_vec(qd, qa) -> np.ndarray:
    """Array form of :func:`quaternion_error` for ``[w, x, y, z]`` inputs."""
    aw, ax, ay, az = qa
    qe = quat_multiply(qd, (aw, -ax, -ay, -az))
    if qe[0] < 0.0:
        qe = -qe
    return 2.0 * qe[1:]


def quaternion_error(desired: UnitQuaternion, actual: UnitQuaternion) -> np.ndarray:
    """Orientation error ``2 * vec(q_d * q_a^-1)`` taken on the short arc.

    The result is expressed in the frame the quaternions are referred to
    (world), vanishes iff the rotations coincide and is unchanged by flipping
    the sign of either input.
    """
    return quat_error_vec(desired.as_array(), actual.as_array())
