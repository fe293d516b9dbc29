from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from magclimb._config import ObservationConfig
from magclimb._model import RobotState
from magclimb.utils._utils import wrap_to_2pi

__all__ = [
    "CLOCK_DIM",
    "ESTIMATOR_INPUT_DIM",
    "ESTIMATOR_OUTPUT_DIM",
    "OBSERVATION_DIM",
    "PROPRIO_DIM",
    "ClockEncoding",
    "NoiseModel",
    "Observation",
    "ObservationModel",
    "clock_encode",
    "gait_phases",
    "low_pass",
]

PROPRIO_DIM = 66
CLOCK_DIM = 8
ESTIMATOR_OUTPUT_DIM = 11
ESTIMATOR_INPUT_DIM = PROPRIO_DIM + CLOCK_DIM
OBSERVATION_DIM = PROPRIO_DIM + ESTIMATOR_OUTPUT_DIM + CLOCK_DIM

# layout of the proprioceptive block
_Q = slice(0, 12)
_QD = slice(12, 24)
_TARGETS = slice(24, 48)
_GRAVITY = slice(48, 51)
_ANG_VEL = slice(51, 54)
_FEET = slice(54, 66)


def gait_phases(t: np.ndarray | float, period: float = 1.2) -> np.ndarray:
    """Per-leg clock phases in ``[0, 2 pi)``, legs offset by a quarter period, shape ``(..., 4)``."""
    if period <= 0:
        raise ValueError(f"Expected a positive gait period, found `{period}`.")
    t = np.asarray(t, dtype=np.float64)[..., None]
    return wrap_to_2pi(2.0 * np.pi * t / period + 0.5 * np.pi * np.arange(1, 5))


def clock_encode(t: np.ndarray | float, period: float = 1.2) -> np.ndarray:
    """``(sin, cos)`` of every leg phase, interleaved per leg, shape ``(..., 8)``."""
    phases = gait_phases(t, period)
    return np.stack([np.sin(phases), np.cos(phases)], axis=-1).reshape(phases.shape[:-1] + (CLOCK_DIM,))


@dataclass(frozen=True)
class ClockEncoding:
    phases: np.ndarray
    encoding: np.ndarray
    period: float

    @classmethod
    def at(cls, t: np.ndarray | float, period: float = 1.2) -> ClockEncoding:
        return cls(phases=gait_phases(t, period), encoding=clock_encode(t, period), period=period)


def low_pass(old: np.ndarray, new: np.ndarray, alpha: float = 0.35) -> np.ndarray:
    """First-order filter ``(1 - alpha) old + alpha new``."""
    old, new = np.asarray(old, dtype=np.float64), np.asarray(new, dtype=np.float64)
    if old.shape != new.shape:
        raise ValueError(f"Filter state has shape `{old.shape}`, input has shape `{new.shape}`.")
    return (1.0 - alpha) * old + alpha * new


@dataclass(frozen=True)
class NoiseModel:
    """Uniform noise half-widths per observation channel; orientation noise and bias are in rad."""

    orientation: float = 0.05
    orientation_bias: float = 0.05
    joint_pos: float = 0.1
    ang_vel: float = 0.1
    joint_vel: float = 0.5
    target_history: float = 0.1
    foot_pos: float = 0.015

    @classmethod
    def from_config(cls, cfg: ObservationConfig) -> NoiseModel:
        if not cfg.noise:
            return cls.zero()
        return cls(
            orientation=cfg.orientation_noise,
            orientation_bias=cfg.orientation_bias,
            joint_pos=cfg.joint_pos_noise,
            ang_vel=cfg.ang_vel_noise,
            joint_vel=cfg.joint_vel_noise,
            target_history=cfg.target_history_noise,
            foot_pos=cfg.foot_pos_noise,
        )

    @classmethod
    def zero(cls) -> NoiseModel:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return not any(vars(self).values())

    def bounds(self) -> np.ndarray:
        """Half-widths of the additive noise on the proprioceptive block."""
        out = np.zeros(PROPRIO_DIM)
        out[_Q], out[_QD], out[_TARGETS] = self.joint_pos, self.joint_vel, self.target_history
        out[_ANG_VEL], out[_FEET] = self.ang_vel, self.foot_pos
        return out


@dataclass
class Observation:
    proprio: np.ndarray
    estimator_input: np.ndarray
    clock: np.ndarray

    def policy_input(self, estimate: np.ndarray) -> np.ndarray:
        """Actor observation: proprioception, estimator output and clock."""
        return np.concatenate([self.proprio, estimate, self.clock], axis=1)


class ObservationModel:
    """
    Per-instance noisy, low-pass filtered proprioception.

    The orientation bias is drawn once per episode. The filter starts from the first observation of an episode.
    """

    def __init__(
        self, n: int, rngs: Sequence[np.random.Generator], config: ObservationConfig | None = None
    ) -> None:
        if len(rngs) != n:
            raise ValueError(f"Expected `{n}` generators, found `{len(rngs)}`.")
        self.n = n
        self.rngs = list(rngs)
        self.config = config or ObservationConfig()
        self.noise = NoiseModel.from_config(self.config)
        self.bias = np.zeros((n, 3))
        self.filtered = np.zeros((n, PROPRIO_DIM))
        self._fresh = np.ones(n, dtype=bool)

    def reset(self, ids: np.ndarray | Sequence[int]) -> None:
        ids = np.asarray(ids, dtype=int)
        for i in ids:
            self.bias[i] = self.rngs[i].uniform(-1.0, 1.0, 3) * self.noise.orientation_bias
        self.filtered[ids] = 0.0
        self._fresh[ids] = True

    def raw(self, state: RobotState, target_history: np.ndarray, gravity: np.ndarray) -> np.ndarray:
        """
        Noise-free proprioception ``(n, 66)``.

        Layout: joint positions, joint velocities, the last two joint targets, gravity direction in the base
        frame, base angular velocity in the base frame and foot positions in the base frame.
        """
        out = np.empty((state.n, PROPRIO_DIM))
        out[:, _Q] = state.q
        out[:, _QD] = state.qd
        out[:, _TARGETS] = np.asarray(target_history).reshape(state.n, 24)
        out[:, _GRAVITY] = state.projected_gravity(gravity)
        out[:, _ANG_VEL] = state.ang_vel_base
        out[:, _FEET] = state.foot_pos_base.reshape(state.n, 12)
        return out

    def corrupt(self, raw: np.ndarray) -> np.ndarray:
        if self.noise.is_zero:
            return raw.copy()
        bounds = self.noise.bounds()
        out = raw.copy()
        for i in range(self.n):
            rng = self.rngs[i]
            out[i] += rng.uniform(-1.0, 1.0, PROPRIO_DIM) * bounds
            tilt = self.bias[i] + rng.uniform(-1.0, 1.0, 3) * self.noise.orientation
            out[i, _GRAVITY] = Rotation.from_rotvec(tilt).apply(raw[i, _GRAVITY])
        return out

    def assemble(
        self, state: RobotState, target_history: np.ndarray, gravity: np.ndarray, t: np.ndarray
    ) -> Observation:
        """
        Noisy and filtered observation of all instances.

        Parameters
        ----------
        state
            Current robot state.
        target_history
            Last two joint target vectors, ``(n, 2, 12)``, newest first.
        gravity
            Gravity per instance, ``(n, 3)``.
        t
            Episode time per instance, drives the gait clock.

        Returns
        -------
        Filtered proprioception, estimator input and the exact clock.
        """
        noisy = self.corrupt(self.raw(state, target_history, gravity))
        fresh = self._fresh[:, None]
        self.filtered = np.where(fresh, noisy, low_pass(self.filtered, noisy, self.config.filter_alpha))
        self._fresh[:] = False
        clock = clock_encode(t, self.config.gait_period)
        return Observation(
            proprio=self.filtered.copy(),
            estimator_input=np.concatenate([self.filtered, clock], axis=1),
            clock=clock,
        )
