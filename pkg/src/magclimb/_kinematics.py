from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

if TYPE_CHECKING:
    from magclimb._model import RobotModel

__all__ = [
    "FACE_NORMAL",
    "FootKinematics",
    "ankle_rotations",
    "calf_rotations",
    "forward_kinematics",
    "inverse_kinematics",
    "leg_jacobians",
    "leg_positions",
]

# magnet face normal in the foot frame
FACE_NORMAL = np.array([0.0, 0.0, -1.0])


class FootKinematics(NamedTuple):
    positions: np.ndarray
    normals: np.ndarray
    positions_base: np.ndarray


def _split(model: RobotModel, q: np.ndarray) -> tuple[np.ndarray, ...]:
    q = np.asarray(q, dtype=np.float64).reshape(-1, 4, 3)
    return q[..., 0], q[..., 1], q[..., 2]


def _sagittal(model: RobotModel, q1: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    _, l1, l2 = model.link_lengths
    x = -l1 * np.sin(q1) - l2 * np.sin(q1 + q2)
    z = -l1 * np.cos(q1) - l2 * np.cos(q1 + q2)
    return x, z


def leg_positions(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """
    Foot positions relative to the base origin, in the base frame.

    Parameters
    ----------
    model
        Robot geometry.
    q
        Joint positions of shape ``(n, 12)``.

    Returns
    -------
    Array of shape ``(n, 4, 3)``.
    """
    q0, q1, q2 = _split(model, q)
    x, z = _sagittal(model, q1, q2)
    y = model.side * model.link_lengths[0]
    c0, s0 = np.cos(q0), np.sin(q0)
    feet = np.stack([x, c0 * y - s0 * z, s0 * y + c0 * z], axis=-1)
    return feet + model.hip_offsets


def leg_jacobians(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Analytic derivative of :func:`leg_positions` with respect to each leg's joints, shape ``(n, 4, 3, 3)``."""
    _, l1, l2 = model.link_lengths
    q0, q1, q2 = _split(model, q)
    x, z = _sagittal(model, q1, q2)
    y = model.side * model.link_lengths[0]
    c0, s0 = np.cos(q0), np.sin(q0)
    dx2, dz2 = -l2 * np.cos(q1 + q2), l2 * np.sin(q1 + q2)

    jac = np.zeros(q0.shape + (3, 3))
    jac[..., 1, 0] = -s0 * y - c0 * z
    jac[..., 2, 0] = c0 * y - s0 * z
    # thigh: d(x, z)/dq1 = (z, -x)
    jac[..., 0, 1], jac[..., 1, 1], jac[..., 2, 1] = z, s0 * x, -c0 * x
    jac[..., 0, 2], jac[..., 1, 2], jac[..., 2, 2] = dx2, -s0 * dz2, c0 * dz2
    return jac


def calf_rotations(q: np.ndarray) -> np.ndarray:
    """Calf orientation relative to the base, ``Rx(q0) @ Ry(q1 + q2)``, shape ``(n, 4, 3, 3)``."""
    q = np.asarray(q, dtype=np.float64).reshape(-1, 4, 3)
    rot = Rotation.from_euler("XY", np.stack([q[..., 0], q[..., 1] + q[..., 2]], axis=-1).reshape(-1, 2))
    return rot.as_matrix().reshape(q.shape[:2] + (3, 3))


def ankle_rotations(rpy: np.ndarray) -> np.ndarray:
    """Foot orientation relative to the calf from roll-pitch-yaw, ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    rpy = np.asarray(rpy, dtype=np.float64)
    return Rotation.from_euler("xyz", rpy.reshape(-1, 3)).as_matrix().reshape(rpy.shape[:-1] + (3, 3))


def forward_kinematics(
    model: RobotModel,
    base_pos: np.ndarray,
    base_quat: np.ndarray,
    q: np.ndarray,
    ankle_rpy: np.ndarray,
) -> FootKinematics:
    """
    World foot positions and magnet face normals.

    Joint positions outside the limits are clamped. The foot point is the ankle centre.

    Parameters
    ----------
    model
        Robot geometry.
    base_pos
        Base positions, ``(n, 3)``.
    base_quat
        Scalar-last base quaternions, ``(n, 4)``.
    q
        Joint positions, ``(n, 12)``.
    ankle_rpy
        Ankle roll-pitch-yaw, ``(n, 4, 3)``.

    Returns
    -------
    :class:`FootKinematics` with world positions, unit face normals and base-frame positions.
    """
    base_pos = np.atleast_2d(base_pos)
    q = model.clamp(np.atleast_2d(q))
    rot = Rotation.from_quat(np.atleast_2d(base_quat)).as_matrix()
    feet_base = leg_positions(model, q)
    positions = base_pos[:, None, :] + np.einsum("nij,nkj->nki", rot, feet_base)
    foot_rot = np.einsum("nij,nkjl,nklm->nkim", rot, calf_rotations(q), ankle_rotations(ankle_rpy))
    normals = foot_rot @ FACE_NORMAL
    return FootKinematics(positions, normals, feet_base)


def inverse_kinematics(model: RobotModel, feet_base: np.ndarray) -> np.ndarray:
    """
    Closed-form joint positions that place the feet at ``feet_base`` (base frame, ``(n, 4, 3)``).

    The knee-backward branch is returned. Unreachable targets are projected onto the workspace boundary and the
    result is clamped to the joint limits.
    """
    l0, l1, l2 = model.link_lengths
    p = np.asarray(feet_base, dtype=np.float64).reshape(-1, 4, 3) - model.hip_offsets
    px, py, pz = p[..., 0], p[..., 1], p[..., 2]
    s = model.side
    z = -np.sqrt(np.maximum(py**2 + pz**2 - l0**2, 1e-12))
    q0 = np.arctan2(pz, py) - np.arctan2(z, s * l0)
    q0 = np.arctan2(np.sin(q0), np.cos(q0))
    cos_q2 = np.clip((px**2 + z**2 - l1**2 - l2**2) / (2 * l1 * l2), -1.0, 1.0)
    q2 = -np.arccos(cos_q2)
    a, b = l1 + l2 * np.cos(q2), l2 * np.sin(q2)
    q1 = np.arctan2(-px, -z) - np.arctan2(b, a)
    q = np.stack([q0, q1, q2], axis=-1).reshape(-1, 12)
    return model.clamp(q)
