"""SE(3) pose algebra for the end effector and local-frame state increments.

Euler convention is fixed package-wide to intrinsic X-Y-Z (roll, pitch, yaw),
i.e. R = Rx(roll) @ Ry(pitch) @ Rz(yaw). Demo files carry this tag in their
header so recorded data is self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EULER_CONVENTION = "intrinsic-xyz"

_ORTHO_TOL = 1e-9
_LOCK_MARGIN = 1e-6  # |pitch| within this of pi/2 counts as gimbal lock


class InvalidPoseError(ValueError):
    """Raised when a rotation matrix is not orthonormal or a pose field is out of range."""


def _check_rotation(rotation: np.ndarray) -> np.ndarray:
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape != (3, 3):
        raise InvalidPoseError(f"rotation must be 3x3, got {rotation.shape}")
    err = np.abs(rotation.T @ rotation - np.eye(3)).max()
    if err > _ORTHO_TOL:
        raise InvalidPoseError(f"rotation not orthonormal (max |R^T R - I| = {err:.3e})")
    det = np.linalg.det(rotation)
    if abs(det - 1.0) > _ORTHO_TOL:
        raise InvalidPoseError(f"rotation has det {det!r}, expected 1")
    return rotation


@dataclass(frozen=True)
class EEPose:
    """End-effector position (m), orientation (3x3 rotation), gripper opening in [0, 1]."""

    position: np.ndarray
    rotation: np.ndarray
    gripper: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (3,):
            raise InvalidPoseError(f"position must have shape (3,), got {pos.shape}")
        if not np.isfinite(pos).all():
            raise InvalidPoseError("position has non-finite entries")
        rot = _check_rotation(self.rotation)
        g = float(self.gripper)
        if not (0.0 <= g <= 1.0):
            raise InvalidPoseError(f"gripper opening {g} outside [0, 1]")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "gripper", g)

    @staticmethod
    def identity(gripper: float = 0.0) -> "EEPose":
        return EEPose(np.zeros(3), np.eye(3), gripper)

    def as_vector(self) -> np.ndarray:
        """7-vector (position, euler, gripper) under the package Euler convention."""
        return np.concatenate([self.position, euler_from_rot(self.rotation), [self.gripper]])

    @staticmethod
    def from_vector(vec: np.ndarray) -> "EEPose":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (7,):
            raise InvalidPoseError(f"pose vector must have shape (7,), got {vec.shape}")
        return EEPose(vec[:3], rot_from_euler(vec[3:6]), vec[6])


@dataclass(frozen=True)
class DeltaState:
    """Local-frame state increment: translation (m), Euler increment (rad), gripper change."""

    dpos: np.ndarray
    deuler: np.ndarray
    dgrip: float

    def __post_init__(self):
        dpos = np.asarray(self.dpos, dtype=np.float64).reshape(3)
        deuler = np.asarray(self.deuler, dtype=np.float64).reshape(3)
        object.__setattr__(self, "dpos", dpos)
        object.__setattr__(self, "deuler", deuler)
        object.__setattr__(self, "dgrip", float(self.dgrip))

    @staticmethod
    def zero() -> "DeltaState":
        return DeltaState(np.zeros(3), np.zeros(3), 0.0)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dpos, self.deuler, [self.dgrip]])

    @staticmethod
    def from_vector(vec: np.ndarray) -> "DeltaState":
        vec = np.asarray(vec, dtype=np.float64).reshape(7)
        return DeltaState(vec[:3], vec[3:6], vec[6])


def _wrap_angle(a: float) -> float:
    """Map an atan2/asin result into (-pi, pi]."""
    if a <= -np.pi:
        return a + 2.0 * np.pi
    return a


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_from_euler(euler: np.ndarray) -> np.ndarray:
    """Rotation matrix from intrinsic X-Y-Z angles (roll, pitch, yaw)."""
    euler = np.asarray(euler, dtype=np.float64).reshape(3)
    return rot_x(euler[0]) @ rot_y(euler[1]) @ rot_z(euler[2])


def euler_from_rot(rotation: np.ndarray) -> np.ndarray:
    """Intrinsic X-Y-Z angles of an orthonormal rotation, each in (-pi, pi].

    At gimbal lock (|pitch| = pi/2) roll is pinned to 0 and yaw absorbs the
    remaining degree of freedom.
    """
    r = _check_rotation(rotation)
    sp = min(1.0, max(-1.0, float(r[0, 2])))
    pitch = float(np.arcsin(sp))
    if np.pi / 2.0 - abs(pitch) < _LOCK_MARGIN:
        roll = 0.0
        yaw = float(np.arctan2(r[1, 0], r[1, 1]))
    else:
        roll = float(np.arctan2(-r[1, 2], r[2, 2]))
        yaw = float(np.arctan2(-r[0, 1], r[0, 0]))
    return np.array([_wrap_angle(roll), _wrap_angle(pitch), _wrap_angle(yaw)])


def relative_delta(a: EEPose, b: EEPose) -> DeltaState:
    """State increment from pose a to pose b, expressed in a's local frame."""
    dpos = a.rotation.T @ (b.position - a.position)
    deuler = euler_from_rot(a.rotation.T @ b.rotation)
    return DeltaState(dpos, deuler, b.gripper - a.gripper)


def apply_delta(a: EEPose, d: DeltaState) -> EEPose:
    """Inverse of relative_delta: advance pose a by a local-frame increment.

    The gripper is clamped back into [0, 1].
    """
    pos = a.position + a.rotation @ d.dpos
    rot = a.rotation @ rot_from_euler(d.deuler)
    grip = min(1.0, max(0.0, a.gripper + d.dgrip))
    return EEPose(pos, rot, grip)


def pose_compose(a: EEPose, b: EEPose) -> EEPose:
    """SE(3) composition on (P, R); the gripper is carried from the left operand."""
    return EEPose(a.position + a.rotation @ b.position, a.rotation @ b.rotation, a.gripper)


def pose_inverse(a: EEPose) -> EEPose:
    """SE(3) inverse on (P, R); the gripper is carried over unchanged."""
    rt = a.rotation.T
    return EEPose(-(rt @ a.position), rt, a.gripper)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix, det fixed to +1."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q
