from __future__ import annotations

import numpy as np

from magclimb._env import ACTION_DIM, ClimbEnv
from magclimb._kinematics import inverse_kinematics, leg_positions
from magclimb._observation import Observation, gait_phases
from magclimb.constants import config as defaults

__all__ = ["ScriptedCrawl", "crawl_foot_targets"]

_SWING = 0.5 * np.pi


def crawl_foot_targets(
    nominal_feet: np.ndarray,
    phases: np.ndarray,
    commands: np.ndarray,
    period: float = defaults.GAIT_PERIOD,
    lift: float = defaults.SWING_HEIGHT,
) -> np.ndarray:
    """
    Base-frame foot targets of an open-loop crawl, ``(n, 4, 3)``.

    A foot swings forward along a half-sine of height ``lift`` while its phase lies in ``(0, pi/2)`` and slides back
    linearly during the remaining three quarters, so the body advances at the commanded planar velocity.
    """
    phases = np.asarray(phases, dtype=np.float64)
    stride = 0.75 * period * np.asarray(commands, dtype=np.float64)[:, None, :2]
    swing = (phases > 0.0) & (phases < _SWING)
    s_swing = np.clip(phases / _SWING, 0.0, 1.0)
    s_stance = np.clip((phases - _SWING) / (2.0 * np.pi - _SWING), 0.0, 1.0)
    progress = np.where(swing, s_swing - 0.5, 0.5 - s_stance)[..., None]
    out = np.array(nominal_feet, dtype=np.float64, copy=True)
    out[..., :2] += progress * stride
    out[..., 2] += np.where(swing, lift * np.sin(np.pi * s_swing), 0.0)
    return out


class ScriptedCrawl:
    """
    Non-learned reference controller: one foot swings at a time, its magnet commanded off during the swing.

    Returns no contact confidence, so the environment gates adhesion on the true contact state.
    """

    def __init__(self, lift: float = defaults.SWING_HEIGHT):
        self.lift = lift

    def __call__(self, obs: Observation, env: ClimbEnv) -> tuple[np.ndarray, None]:
        model = env.model
        nominal = leg_positions(model, np.tile(env.nominal_targets, (env.n, 1)))
        period = env.config.observation.gait_period
        phases = gait_phases(env.episode_time, period)
        feet = crawl_foot_targets(nominal, phases, env.commands, period, self.lift)
        q = inverse_kinematics(model, feet)
        actions = np.zeros((env.n, ACTION_DIM))
        actions[:, :12] = (q - env.nominal_targets) / env.config.network.joint_action_scale
        actions[:, 12:] = np.where((phases > 0.0) & (phases < _SWING), 0.0, 1.0)
        return actions, None
