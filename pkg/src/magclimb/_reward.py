from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from magclimb._config import RewardConfig
from magclimb._curriculum import CurriculumState
from magclimb.utils._utils import wrap_to_2pi

__all__ = ["POSITIVE_TERMS", "PENALTY_TERMS", "RewardBreakdown", "RewardInputs", "compute_rewards", "gait_indicator"]

POSITIVE_TERMS = ("lin_vel", "ang_vel", "standing_contact", "gait", "foot_height")
PENALTY_TERMS = (
    "foot_slip",
    "foot_clearance",
    "orientation",
    "torque",
    "joint_position",
    "joint_speed",
    "joint_acceleration",
    "smoothness1",
    "smoothness2",
    "base_motion",
    "magnet",
)


def swing_window(phases: np.ndarray) -> np.ndarray:
    """Whether each gait phase lies in the open swing window ``(0, pi/2)``."""
    phases = wrap_to_2pi(phases)
    return (phases > 0.0) & (phases < np.pi / 2)


def gait_indicator(phases: np.ndarray | float, contact: np.ndarray | bool) -> np.ndarray:
    """``+1`` for a foot in the air during its swing window or on the wall outside it, ``-1`` otherwise."""
    swing = swing_window(np.asarray(phases, dtype=np.float64))
    contact = np.asarray(contact, dtype=bool)
    return np.where(swing != contact, 1.0, -1.0)


@dataclass
class RewardInputs:
    """
    Batched inputs of the reward terms.

    Base velocities are in the base frame, foot velocities in the world frame. The wall plane holds the
    foot ``x, y`` components and its normal the ``z`` component.
    """

    command: np.ndarray
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    phases: np.ndarray
    foot_height: np.ndarray
    foot_vel: np.ndarray
    contact: np.ndarray
    tau: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    q_nominal: np.ndarray
    actions: np.ndarray
    prev_actions: np.ndarray
    prev2_actions: np.ndarray
    magnet_actions: np.ndarray
    body_z: np.ndarray
    reference_z: np.ndarray

    @property
    def n(self) -> int:
        return len(self.command)

    @property
    def standing(self) -> np.ndarray:
        """Instances commanded to stand still, all three command channels exactly zero."""
        return np.all(self.command == 0.0, axis=1)


@dataclass
class RewardBreakdown:
    """Every reward term per instance; ``total`` combines them multiplicatively."""

    lin_vel: np.ndarray
    ang_vel: np.ndarray
    standing_contact: np.ndarray
    gait: np.ndarray
    foot_height: np.ndarray
    foot_slip: np.ndarray
    foot_clearance: np.ndarray
    orientation: np.ndarray
    torque: np.ndarray
    joint_position: np.ndarray
    joint_speed: np.ndarray
    joint_acceleration: np.ndarray
    smoothness1: np.ndarray
    smoothness2: np.ndarray
    base_motion: np.ndarray
    magnet: np.ndarray
    total: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return sum(getattr(self, name) for name in POSITIVE_TERMS)

    @property
    def penalty(self) -> np.ndarray:
        return sum(getattr(self, name) for name in PENALTY_TERMS)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({f.name: getattr(self, f.name) for f in fields(self)})

    def mean(self) -> dict[str, float]:
        return {f.name: float(np.mean(getattr(self, f.name))) for f in fields(self)}


def compute_rewards(
    inputs: RewardInputs, sched: CurriculumState, config: RewardConfig | None = None
) -> RewardBreakdown:
    """
    Evaluate all reward terms.

    Parameters
    ----------
    inputs
        Batched robot quantities.
    sched
        Curriculum values, providing the scheduling factor and the smoothness gate.
    config
        Term weights.

    Returns
    -------
    The per-term breakdown and ``total = positive * exp(-penalty_scale * penalty)``.
    """
    cfg = config or RewardConfig()
    kappa_up, kappa_down = sched.velocity_scale, sched.penalty_scale
    standing = inputs.standing
    swing = swing_window(inputs.phases)
    contact = inputs.contact.astype(np.float64)

    lin_err = np.sum((inputs.command[:, :2] - inputs.lin_vel[:, :2]) ** 2, axis=1)
    ang_err = (inputs.command[:, 2] - inputs.ang_vel[:, 2]) ** 2
    lin_vel = kappa_up * cfg.velocity_weight * np.exp(-cfg.velocity_sharpness * lin_err)
    ang_vel = kappa_up * cfg.velocity_weight * np.exp(-cfg.velocity_sharpness * ang_err)

    stand_ok = np.where(inputs.contact & standing[:, None], 1.0, -1.0)
    standing_contact = cfg.standing_weight * stand_ok.sum(axis=1)
    gait = cfg.gait_weight * gait_indicator(inputs.phases, inputs.contact).sum(axis=1)

    target_height = np.where(swing, cfg.swing_height, 0.0)
    height_err = (target_height - inputs.foot_height) ** 2
    foot_height = cfg.foot_height_weight * np.exp(-np.sum(swing * height_err, axis=1))

    slip = np.sum(inputs.foot_vel[..., :2] ** 2, axis=-1)
    foot_slip = kappa_down * cfg.foot_slip_weight * np.sum(contact * slip, axis=1)
    foot_clearance = cfg.foot_clearance_weight * np.sum(
        (1.0 - contact) * height_err * np.sqrt(np.abs(inputs.foot_vel[..., 2])), axis=1
    )

    cos = np.clip(inputs.body_z @ np.asarray(inputs.reference_z), -1.0, 1.0)
    orientation = cfg.orientation_weight * np.arccos(cos)
    torque = kappa_down * cfg.torque_weight * np.sum(inputs.tau**2, axis=1)
    alpha = np.where(standing, cfg.joint_position_weight_standing, cfg.joint_position_weight_moving)
    joint_position = alpha * np.sum((inputs.q - inputs.q_nominal) ** 2, axis=1)
    joint_speed = cfg.joint_speed_weight * np.sum(inputs.qd**2, axis=1)
    joint_acceleration = cfg.joint_acceleration_weight * np.sum(inputs.qdd**2, axis=1)

    gate = 1.0 if sched.smoothness_active else 0.0
    first = inputs.actions - inputs.prev_actions
    second = inputs.actions - 2.0 * inputs.prev_actions + inputs.prev2_actions
    smoothness1 = gate * cfg.smoothness1_weight * np.sum(first**2, axis=1)
    smoothness2 = gate * cfg.smoothness2_weight * np.sum(second**2, axis=1)

    # sign of the vertical term kept as in the reward table
    base_motion = cfg.base_motion_weight * np.exp(
        -0.5 * np.sum(inputs.ang_vel[:, :2] ** 2, axis=1) + 0.2 * np.abs(inputs.lin_vel[:, 2])
    )
    magnet = cfg.magnet_weight * np.sum((contact - inputs.magnet_actions) ** 2, axis=1)

    terms = {
        "lin_vel": lin_vel,
        "ang_vel": ang_vel,
        "standing_contact": standing_contact,
        "gait": gait,
        "foot_height": foot_height,
        "foot_slip": foot_slip,
        "foot_clearance": foot_clearance,
        "orientation": orientation,
        "torque": torque,
        "joint_position": joint_position,
        "joint_speed": joint_speed,
        "joint_acceleration": joint_acceleration,
        "smoothness1": smoothness1,
        "smoothness2": smoothness2,
        "base_motion": base_motion,
        "magnet": magnet,
    }
    positive = sum(terms[name] for name in POSITIVE_TERMS)
    penalty = sum(terms[name] for name in PENALTY_TERMS)
    return RewardBreakdown(**terms, total=positive * np.exp(-cfg.penalty_scale * penalty))
