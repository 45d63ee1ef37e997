"""Rotation and rigid-transform primitives shared by the whole stack.

Conventions: world z points up, attitude is roll-pitch-yaw with
R = Rz(yaw) @ Ry(pitch) @ Rx(roll), angular velocities live in the body
frame unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SO3_TOL = 1e-9


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with hat(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Extract the 3-vector of a skew-symmetric matrix (inverse of hat)."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rotx(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roty(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotz(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    k = hat(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rpy_to_matrix(rpy) -> np.ndarray:
    """Roll-pitch-yaw to rotation matrix, R = Rz(yaw) Ry(pitch) Rx(roll)."""
    roll, pitch, yaw = rpy
    return rotz(yaw) @ roty(pitch) @ rotx(roll)


def matrix_to_rpy(R: np.ndarray) -> np.ndarray:
    """Extract roll-pitch-yaw from a rotation matrix (ZYX convention).

    Degenerate at |pitch| = pi/2 where roll and yaw are coupled; there we
    report roll = 0 and fold everything into yaw, which is fine for logging.
    """
    pitch = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
    if abs(R[2, 0]) > 1.0 - 1e-12:
        yaw = np.arctan2(-R[0, 1], R[1, 1])
        roll = 0.0
    else:
        roll = np.arctan2(R[2, 1], R[2, 2])
        yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), Shepperd's method."""
    t = np.trace(R)
    if t > 0.0:
        r = np.sqrt(1.0 + t)
        w = 0.5 * r
        s = 0.5 / r
        x = (R[2, 1] - R[1, 2]) * s
        y = (R[0, 2] - R[2, 0]) * s
        z = (R[1, 0] - R[0, 1]) * s
    else:
        i = int(np.argmax([R[0, 0], R[1, 1], R[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = np.empty(4)
        q[1 + i] = 0.5 * r
        s = 0.5 / r
        q[0] = (R[k, j] - R[j, k]) * s
        q[1 + j] = (R[j, i] + R[i, j]) * s
        q[1 + k] = (R[k, i] + R[i, k]) * s
        w, x, y, z = q
    return np.array([w, x, y, z])


def rotation_log(R: np.ndarray) -> np.ndarray:
    """SO(3) log map as a rotation vector, robust at 0 and near pi."""
    w, x, y, z = matrix_to_quat(R)
    vn = np.sqrt(x * x + y * y + z * z)
    if vn < 1e-16:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(vn, w)
    if angle > np.pi:
        angle -= 2.0 * np.pi
    return np.array([x, y, z]) * (angle / vn)


def rotation_exp(v: np.ndarray) -> np.ndarray:
    """SO(3) exp map of a rotation vector."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.eye(3) + hat(v)
    return axis_angle(v / angle, angle)


def so3_right_jacobian_inv(v: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian of SO(3) at rotation vector v.

    Maps body angular velocity to the rate of the log-map coordinates,
    d/dt Log(R) = Jr_inv(Log R) @ omega_body.
    """
    theta = np.linalg.norm(v)
    K = hat(v)
    if theta < 1e-8:
        return np.eye(3) + 0.5 * K + (K @ K) / 12.0
    c = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * K + c * (K @ K)


def euler_rate_matrix(rpy) -> np.ndarray:
    """Map body angular velocity to roll-pitch-yaw rates.

    Raises near the |pitch| = pi/2 gimbal lock, where Euler rates blow up.
    """
    roll, pitch, _ = rpy
    if abs(pitch) >= np.pi / 2 - 0.01:
        raise ValueError(f"Euler-rate conversion near gimbal lock (pitch={pitch:.4f})")
    sr, cr = np.sin(roll), np.cos(roll)
    tp, cp = np.tan(pitch), np.cos(pitch)
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )


def is_rotation(R: np.ndarray, tol: float = SO3_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (
        np.max(np.abs(R.T @ R - np.eye(3))) < tol
        and abs(np.linalg.det(R) - 1.0) < tol
    )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RigidTransform:
    """Pose of one frame in another: rotation in SO(3) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _freeze(np.asarray(self.rotation, dtype=float).reshape(3, 3))
        t = _freeze(np.asarray(self.translation, dtype=float).reshape(3))
        if not is_rotation(R):
            raise ValueError("rotation is not in SO(3) within tolerance")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def unsafe(rotation: np.ndarray, translation: np.ndarray) -> "RigidTransform":
        """Skip SO(3) validation; for hot paths composing known-good frames."""
        t = object.__new__(RigidTransform)
        object.__setattr__(t, "rotation", rotation)
        object.__setattr__(t, "translation", translation)
        return t

    @staticmethod
    def from_rpy_xyz(rpy=(0.0, 0.0, 0.0), xyz=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(rpy_to_matrix(rpy), np.asarray(xyz, dtype=float))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        # composition preserves SO(3); skip re-validation
        return RigidTransform.unsafe(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform.unsafe(np.ascontiguousarray(Rt), -Rt @ self.translation)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-10) -> bool:
        return (
            np.max(np.abs(self.rotation - other.rotation)) < tol
            and np.max(np.abs(self.translation - other.translation)) < tol
        )
