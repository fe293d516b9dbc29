from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from magclimb._config import CurriculumConfig
from magclimb.constants import config as defaults
from magclimb.constants._constants import Ablation

__all__ = [
    "CurriculumSchedule",
    "CurriculumState",
    "gravity_of",
    "kappa_of",
    "phase_of",
    "prob_attach_of",
    "theta_of",
    "tilt_gravity",
]

G0 = np.array([0.0, 0.0, -defaults.GRAVITY])


def _check(t: float) -> None:
    if t < 0:
        raise ValueError(f"Training iteration must be non-negative, found `{t}`.")


def theta_of(t: float, scale: float = 1.0) -> float:
    """Gravity tilt in rad: flat until the end of the first phase, then a linear ramp to vertical."""
    _check(t)
    start, ramp = defaults.PHASE1_END * scale, defaults.THETA_RAMP * scale
    return float(min(np.pi / 2, max(0.0, np.pi / 2 * (t - start) / ramp)))


def tilt_gravity(theta: float, g0: np.ndarray | None = None) -> np.ndarray:
    """Rotate ``g0`` by ``theta`` about the world +y axis."""
    g0 = G0 if g0 is None else np.asarray(g0, dtype=np.float64)
    return Rotation.from_rotvec([0.0, theta, 0.0]).apply(g0)


def gravity_of(t: float, g0: np.ndarray | None = None, scale: float = 1.0) -> np.ndarray:
    return tilt_gravity(theta_of(t, scale), g0)


def prob_attach_of(t: float, scale: float = 1.0, floor: float = defaults.PROB_FLOOR) -> float:
    """Attachment success probability, held at 1 and then lowered linearly to ``floor``."""
    _check(t)
    start, ramp = defaults.PROB_RAMP_START * scale, defaults.PROB_RAMP * scale
    return float(1.0 - (1.0 - floor) * min(max(t - start, 0.0), ramp) / ramp)


def kappa_of(t: float, scale: float = 1.0, base: float = defaults.KAPPA_BASE) -> float:
    """Reward scheduling factor, decaying once the first phase is over."""
    _check(t)
    return float(base ** (max(t - defaults.PHASE1_END * scale, 0.0) / scale))


def phase_of(t: float, scale: float = 1.0) -> tuple[int, bool]:
    """
    Curriculum phase and whether the action smoothness terms are active.

    Returns
    -------
    ``(phase, smoothness_active)`` with phase 1 on flat ground, 2 during the tilt ramp and 3 once the
    stochastic adhesion ramp has begun.
    """
    _check(t)
    if t <= defaults.PHASE1_END * scale:
        phase = 1
    elif t <= defaults.PROB_RAMP_START * scale:
        phase = 2
    else:
        phase = 3
    return phase, bool(t >= defaults.SMOOTHNESS_START * scale)


@dataclass(frozen=True)
class CurriculumState:
    """Schedule values in effect during one training iteration."""

    iteration: float
    theta: float
    gravity: tuple[float, float, float]
    prob_attach: float
    kappa: float
    phase: int
    smoothness_active: bool
    adhesion_enabled: bool

    @property
    def velocity_scale(self) -> float:
        return 1.5 - 0.5 * self.kappa

    @property
    def penalty_scale(self) -> float:
        return 0.5 + 0.5 * self.kappa

    @classmethod
    def vertical(cls, prob_attach: float = 1.0) -> CurriculumState:
        """Evaluation setting: vertical wall with adhesion switched on."""
        return cls(
            iteration=0.0,
            theta=np.pi / 2,
            gravity=tuple(tilt_gravity(np.pi / 2)),
            prob_attach=prob_attach,
            kappa=1.0,
            phase=3,
            smoothness_active=True,
            adhesion_enabled=True,
        )


class CurriculumSchedule:
    """
    Three-phase schedule with configurable breakpoints and ablations.

    All breakpoints in ``config`` are multiplied by ``config.scale``. ``config.stage_limit`` pins the tilt,
    probability and phase at the end of the given phase.
    """

    def __init__(self, config: CurriculumConfig | None = None, ablation: Ablation | str = Ablation.FULL):
        self.config = config or CurriculumConfig()
        self.config.validate()
        self.ablation = Ablation(ablation)

    def _scaled(self, value: float) -> float:
        return value * self.config.scale

    def _limited(self, t: float) -> float:
        if self.config.stage_limit == 1:
            return min(t, self._scaled(self.config.phase1_end))
        if self.config.stage_limit == 2:
            return min(t, self._scaled(self.config.prob_ramp_start))
        return t

    def theta(self, t: float) -> float:
        _check(t)
        if self.ablation is Ablation.NO_CURRICULUM:
            return np.pi / 2
        start, ramp = self._scaled(self.config.phase1_end), self._scaled(self.config.theta_ramp)
        return float(np.clip(np.pi / 2 * (self._limited(t) - start) / ramp, 0.0, np.pi / 2))

    def gravity(self, t: float) -> np.ndarray:
        return tilt_gravity(self.theta(t))

    def prob_attach(self, t: float) -> float:
        _check(t)
        if self.ablation in (Ablation.NO_PROBABILISTIC, Ablation.NO_MODELING):
            return 1.0
        start, ramp = self._scaled(self.config.prob_ramp_start), self._scaled(self.config.prob_ramp)
        frac = min(max(self._limited(t) - start, 0.0), ramp) / ramp
        return float(1.0 - (1.0 - self.config.prob_floor) * frac)

    def kappa(self, t: float) -> float:
        _check(t)
        exponent = max(t - self._scaled(self.config.phase1_end), 0.0) / self.config.scale
        return float(self.config.kappa_base**exponent)

    def phase(self, t: float) -> int:
        _check(t)
        t = self._limited(t)
        if t <= self._scaled(self.config.phase1_end):
            return 1
        if t <= self._scaled(self.config.prob_ramp_start):
            return 2
        return 3

    def smoothness_active(self, t: float) -> bool:
        return bool(t >= self._scaled(self.config.smoothness_start))

    def adhesion_enabled(self, t: float) -> bool:
        if self.ablation is Ablation.NO_CURRICULUM or self.config.adhesion_in_phase1:
            return True
        return self.phase(t) > 1

    def state(self, t: float) -> CurriculumState:
        return CurriculumState(
            iteration=float(t),
            theta=self.theta(t),
            gravity=tuple(float(v) for v in self.gravity(t)),
            prob_attach=self.prob_attach(t),
            kappa=self.kappa(t),
            phase=self.phase(t),
            smoothness_active=self.smoothness_active(t),
            adhesion_enabled=self.adhesion_enabled(t),
        )

    def table(self, iterations: int | None = None, step: int = 100) -> pd.DataFrame:
        """
        Tabulate the schedule.

        Parameters
        ----------
        iterations
            Last iteration, by default the scaled end of the probability ramp.
        step
            Iteration spacing.

        Returns
        -------
        One row per tabulated iteration with ``iteration, theta, theta_deg, prob_attach, kappa, phase,
        smoothness_active, adhesion_enabled`` columns.
        """
        if step < 1:
            raise ValueError(f"Expected a positive `step`, found `{step}`.")
        if iterations is None:
            iterations = round(self._scaled(self.config.prob_ramp_start + self.config.prob_ramp))
        return self.table_at(range(0, iterations + 1, step))

    def table_at(self, iterations: Iterable[float]) -> pd.DataFrame:
        """Schedule values at arbitrary ``iterations``, same columns as :meth:`table`."""
        rows = []
        for t in iterations:
            s = self.state(t)
            rows.append(
                {
                    "iteration": t,
                    "theta": s.theta,
                    "theta_deg": np.degrees(s.theta),
                    "prob_attach": s.prob_attach,
                    "kappa": s.kappa,
                    "phase": s.phase,
                    "smoothness_active": s.smoothness_active,
                    "adhesion_enabled": s.adhesion_enabled,
                }
            )
        return pd.DataFrame(rows)
