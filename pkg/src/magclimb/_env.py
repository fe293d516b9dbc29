from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger

from magclimb._adhesion import AdhesionModel, AdhesionStep
from magclimb._config import ClimbConfig
from magclimb._curriculum import CurriculumState
from magclimb._dynamics import (
    ActionDelayBuffer,
    NonFiniteState,
    alignment_gap,
    apply_action_delay,
    step,
    tangential_demand,
)
from magclimb._model import ActuationConfig, RobotModel, RobotState, WallEnvironment
from magclimb._observation import Observation, ObservationModel, gait_phases
from magclimb._reward import RewardBreakdown, RewardInputs, compute_rewards
from magclimb.constants import config as defaults
from magclimb.constants._constants import Ablation, TerminationCause
from magclimb.utils._utils import spawn_generators

__all__ = ["ACTION_DIM", "PRIVILEGED_DIM", "ClimbEnv", "StepResult", "detect_fall", "update_frozen_timer"]

ACTION_DIM = 16
PRIVILEGED_DIM = 11


def detect_fall(
    state: RobotState,
    wall: WallEnvironment,
    margin: float = defaults.FALL_MARGIN,
    detach_distance: float = defaults.DETACH_DISTANCE,
) -> np.ndarray:
    """
    Whether each robot has left the wall.

    A robot fell when its base is more than ``margin`` below the lowest point of the wall along the up
    direction, or further than ``detach_distance`` from the wall plane.
    """
    up = -wall.gravity / np.linalg.norm(wall.gravity, axis=1, keepdims=True)
    below = np.sum(up * state.base_pos, axis=1) < wall.bottom_edge_height() - margin
    away = wall.height(state.base_pos) > detach_distance
    return below | away


def update_frozen_timer(timer: np.ndarray, attached: np.ndarray, dt: float) -> np.ndarray:
    """Time all four feet have been attached without interruption."""
    return np.where(np.all(attached, axis=1), timer + dt, 0.0)


@dataclass
class StepResult:
    """
    Outcome of one control step of all instances.

    Per-foot flags describe the last physics sub-step. ``observation`` and ``privileged`` describe the state
    the policy acts on next, i.e. after automatic resets.
    """

    rewards: np.ndarray
    dones: np.ndarray
    causes: np.ndarray
    timeouts: np.ndarray
    durations: np.ndarray
    breakdown: RewardBreakdown
    measured: np.ndarray
    commands: np.ndarray
    time: np.ndarray
    stance: np.ndarray
    attached: np.ndarray
    force_active: np.ndarray
    reasons: np.ndarray
    observation: Observation
    privileged: np.ndarray

    @property
    def terminated(self) -> np.ndarray:
        return self.causes != TerminationCause.NONE.code


class ClimbEnv:
    """
    Vectorised magnetic climbing environment.

    Each control step applies one action per instance for ``decimation`` physics steps. Action delay and
    adhesion are updated every physics step.

    Parameters
    ----------
    config
        Run configuration.
    n
        Number of instances.
    seed
        Seed of the per-instance generators.
    randomize
        Whether physical parameters are randomised at every reset.
    oracle_contact
        Use the true contact state instead of the supplied contact confidence in the adhesion gate.
    auto_reset
        Reset finished instances at the end of :meth:`step`.
    """

    def __init__(
        self,
        config: ClimbConfig | None = None,
        n: int = 1,
        seed: int = 0,
        randomize: bool = True,
        oracle_contact: bool | None = None,
        auto_reset: bool = True,
    ) -> None:
        self.config = cfg = (config or ClimbConfig()).validate()
        if n < 1:
            raise ValueError(f"Expected at least one instance, found `{n}`.")
        self.n = n
        self.randomize = randomize
        self.oracle_contact = cfg.train.oracle_contact if oracle_contact is None else oracle_contact
        self.auto_reset = auto_reset
        self.dt = defaults.SIM_DT
        self.decimation = defaults.DECIMATION
        self.control_dt = self.dt * self.decimation
        self.episode_length = cfg.train.episode_length
        self.frozen_time = cfg.eval.frozen_time
        self.rngs = spawn_generators(seed, n)

        self.model = RobotModel.from_config(cfg.robot)
        self.wall = WallEnvironment.from_config(cfg.wall, n, friction=float(np.mean(cfg.contact.friction_range)))
        self.act = ActuationConfig.nominal(n, cfg.actuation)
        modeling = cfg.ablation is not Ablation.NO_MODELING
        self.adhesion = AdhesionModel(n, self.rngs, cfg.adhesion, modeling=modeling)
        self.observer = ObservationModel(n, self.rngs, cfg.observation)
        self.schedule = CurriculumState.vertical()

        self.nominal_targets = self.model.nominal_joint_config.copy()
        self.state = RobotState.nominal(self.model, n)
        self.commands = np.zeros((n, 3))
        self.episode_time = np.zeros(n)
        self.frozen_timer = np.zeros(n)
        self.actions = np.zeros((n, ACTION_DIM))
        self.prev_actions = np.zeros((n, ACTION_DIM))
        self.target_history = np.tile(self.nominal_targets, (n, 2, 1))
        self.clock = 0.0
        self.buffer = ActionDelayBuffer(n, 12, max_delay=cfg.actuation.delay_range[1], dt=self.dt)
        self.buffer.push(self.clock, self.target_history[:, 0])
        self._last = self._empty_adhesion()

    def set_schedule(self, sched: CurriculumState) -> None:
        """
        Use ``sched`` from now on.

        Reward scaling and the smoothness gate apply immediately. Gravity, attachment probability and the
        adhesion switch apply to every instance at its next reset, so an episode never changes its wall.
        """
        if not 0.0 <= sched.prob_attach <= 1.0:
            raise ValueError(f"Attachment probability must lie in [0, 1], found `{sched.prob_attach}`.")
        self.schedule = sched

    def sample_commands(self, ids: np.ndarray) -> np.ndarray:
        ranges = np.asarray(self.config.train.command_ranges)
        return np.stack([self.rngs[i].uniform(-ranges, ranges) for i in ids]) if len(ids) else np.zeros((0, 3))

    def reset(
        self, env_ids: np.ndarray | Sequence[int] | None = None, commands: np.ndarray | None = None
    ) -> tuple[Observation, np.ndarray]:
        """
        Start new episodes for ``env_ids``.

        Parameters
        ----------
        env_ids
            Instances to reset, all by default.
        commands
            Velocity commands ``(len(env_ids), 3)``, sampled uniformly from the command ranges if ``None``.

        Returns
        -------
        The observation of all instances and their privileged labels.
        """
        ids = np.arange(self.n) if env_ids is None else np.asarray(env_ids, dtype=int)
        if commands is None:
            commands = self.sample_commands(ids)
        commands = np.asarray(commands, dtype=np.float64).reshape(len(ids), 3)
        sched = self.schedule

        self.wall.gravity[ids] = sched.gravity
        if self.randomize:
            self.wall.sample_friction(ids, self.rngs, self.config.contact)
            self.act.sample(ids, self.rngs, self.config.actuation)
        self.adhesion.set_prob_attach(ids, sched.prob_attach)
        self.adhesion.set_enabled(ids, sched.adhesion_enabled)
        self.adhesion.reset(ids)
        self.observer.reset(ids)

        self.state.assign(ids, RobotState.nominal(self.model, len(ids)))
        self.commands[ids] = commands
        self.episode_time[ids] = 0.0
        self.frozen_timer[ids] = 0.0
        self.actions[ids] = 0.0
        self.prev_actions[ids] = 0.0
        self.target_history[ids] = self.nominal_targets
        self.buffer.reset(ids, self.nominal_targets)
        self._last.attached[ids] = False
        self._last.pull[ids] = 0.0
        logger.debug(f"Reset {len(ids)} instances, prob_attach={sched.prob_attach:.3f}")
        return self.observe(), self.privileged()

    def observe(self) -> Observation:
        return self.observer.assemble(self.state, self.target_history, self.wall.gravity, self.episode_time)

    def privileged(self) -> np.ndarray:
        """Estimator labels ``(n, 11)``: base velocity in the base frame, foot heights and contacts."""
        return np.concatenate(
            [self.state.lin_vel_base, self.wall.height(self.state.foot_pos), self.state.contact.astype(np.float64)],
            axis=1,
        )

    def joint_targets(self, actions: np.ndarray) -> np.ndarray:
        scale = self.config.network.joint_action_scale
        return self.model.clamp(self.nominal_targets + scale * actions[:, :12])

    def _empty_adhesion(self) -> AdhesionStep:
        shape = (self.n, 4)
        return AdhesionStep(
            codes=np.zeros(shape, dtype=int),
            attached=np.zeros(shape, dtype=bool),
            sampled=np.zeros(shape, dtype=bool),
            epm_on=np.ones(shape, dtype=bool),
            command_on=np.ones(shape, dtype=bool),
            pull=np.zeros(shape),
        )

    def step(self, actions: np.ndarray, contact_confidence: np.ndarray | None = None) -> StepResult:
        """
        Apply ``actions`` for one control step.

        Parameters
        ----------
        actions
            ``(n, 16)``: twelve joint target offsets and four magnet commands.
        contact_confidence
            Estimated contact probability per foot ``(n, 4)``. The true contact state is used when ``None`` or in
            oracle mode.

        Returns
        -------
        Rewards, terminations and per-foot adhesion events.
        """
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n, ACTION_DIM):
            raise ValueError(f"Expected actions of shape `{(self.n, ACTION_DIM)}`, found `{actions.shape}`.")
        if not np.isfinite(actions).all():
            raise ValueError("Actions must be finite.")
        targets = self.joint_targets(actions)
        magnet = actions[:, 12:]
        if contact_confidence is None or self.oracle_contact:
            confidence = None
        else:
            confidence = np.clip(np.asarray(contact_confidence, dtype=np.float64).reshape(self.n, 4), 0.0, 1.0)

        non_finite = np.zeros(self.n, dtype=bool)
        state = self.state
        adh = self._last
        for _ in range(self.decimation):
            self.clock += self.dt
            effective = apply_action_delay(self.buffer, targets, self.act.action_delay, self.clock)
            conf = state.contact.astype(np.float64) if confidence is None else confidence
            gaps = alignment_gap(state, self.wall, self.model)
            ferro = self.wall.on_ferromagnetic(state.foot_pos)
            adh = self.adhesion.update(magnet, conf, gaps, ferro, now=self.clock, dt=self.dt)
            demand = tangential_demand(state, self.wall, self.config.contact)
            forces = self.adhesion.forces(adh, self.wall.normal, demand)
            try:
                new = step(self.model, state, self.wall, self.act, effective, forces, self.dt, self.config.contact)
            except NonFiniteState as err:
                logger.warning(f"Non-finite state in instances {err.env_ids.tolist()}, terminating them")
                new = err.state
                new.assign(err.env_ids, state.subset(err.env_ids))
                non_finite[err.env_ids] = True
            state = new
        self.state = state
        self._last = adh
        self.episode_time += self.control_dt

        breakdown = compute_rewards(self._reward_inputs(actions, magnet), self.schedule, self.config.reward)
        rewards = np.where(non_finite, 0.0, breakdown.total)
        self.prev_actions, self.actions = self.actions, actions.copy()
        self.target_history = np.stack([targets, self.target_history[:, 0]], axis=1)

        self.frozen_timer = update_frozen_timer(self.frozen_timer, adh.attached, self.control_dt)
        causes = np.full(self.n, TerminationCause.NONE.code)
        causes[detect_fall(state, self.wall, self.config.eval.fall_margin, self.config.eval.detach_distance)] = (
            TerminationCause.FELL.code
        )
        causes[self.frozen_timer > self.frozen_time] = TerminationCause.FROZEN.code
        causes[non_finite] = TerminationCause.NON_FINITE.code
        timeouts = (causes == TerminationCause.NONE.code) & (self.episode_time >= self.episode_length - 1e-9)
        dones = timeouts | (causes != TerminationCause.NONE.code)

        events = {
            "rewards": rewards,
            "dones": dones,
            "causes": causes,
            "timeouts": timeouts,
            "durations": self.episode_time.copy(),
            "breakdown": breakdown,
            "measured": np.concatenate([state.lin_vel_base[:, :2], state.ang_vel_base[:, 2:]], axis=1),
            "commands": self.commands.copy(),
            "time": self.episode_time.copy(),
            "stance": state.contact.copy(),
            "attached": adh.attached.copy(),
            "force_active": adh.pull > 0.0,
            "reasons": adh.codes.copy(),
        }
        if self.auto_reset and dones.any():
            self.reset(np.flatnonzero(dones))
        return StepResult(**events, observation=self.observe(), privileged=self.privileged())

    def _reward_inputs(self, actions: np.ndarray, magnet: np.ndarray) -> RewardInputs:
        state = self.state
        return RewardInputs(
            command=self.commands,
            lin_vel=state.lin_vel_base,
            ang_vel=state.ang_vel_base,
            phases=gait_phases(self.episode_time, self.config.observation.gait_period),
            foot_height=self.wall.height(state.foot_pos),
            foot_vel=state.foot_vel,
            contact=state.contact,
            tau=state.tau,
            q=state.q,
            qd=state.qd,
            qdd=state.qdd,
            q_nominal=self.model.nominal_joint_config,
            actions=actions,
            prev_actions=self.actions,
            prev2_actions=self.prev_actions,
            magnet_actions=magnet,
            body_z=state.body_z,
            reference_z=self.wall.normal,
        )
