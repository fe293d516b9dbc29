from __future__ import annotations

from collections import deque
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from loguru import logger

from magclimb._config import ClimbConfig
from magclimb._curriculum import CurriculumSchedule, CurriculumState
from magclimb._env import PRIVILEGED_DIM, ClimbEnv, StepResult
from magclimb._observation import ESTIMATOR_INPUT_DIM, Observation
from magclimb.constants._pkg_constants import Key
from magclimb.learning._checkpoint import build_networks, save_checkpoint
from magclimb.learning._networks import CONTACT_SLICE
from magclimb.learning._ppo import PPO, NonFiniteLoss, UpdateStats
from magclimb.utils._utils import header_lines, seed_everything, write_table

__all__ = ["CURVE_COLUMNS", "Trainer", "train"]

CURVE_COLUMNS = (
    "iteration",
    "mean_reward",
    "success_rate",
    "episodes",
    "theta",
    "prob_attach",
    "kappa",
    "phase",
    "surrogate_loss",
    "value_loss",
    "entropy",
    "estimator_loss",
    "kl",
    "aborted",
)

_SUCCESS_WINDOW = 100


def _tensor(x: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float32)


class Trainer:
    """
    Curriculum PPO training of the climbing policy and the state estimator.

    The curriculum is evaluated once per iteration and frozen for the whole rollout.

    Parameters
    ----------
    config
        Run configuration; ``train``, ``ppo``, ``network`` and ``curriculum`` sections are used here.
    run_dir
        Directory receiving the curves, checkpoints and configuration snapshot. Nothing is written if ``None``.
    seed
        Overrides ``train.seed``.
    """

    def __init__(self, config: ClimbConfig | None = None, run_dir: str | Path | None = None, seed: int | None = None):
        self.config = cfg = (config or ClimbConfig()).validate()
        self.seed = cfg.train.seed if seed is None else seed
        self.run_dir = None if run_dir is None else Path(run_dir)
        seed_everything(self.seed)
        torch.set_num_threads(cfg.train.workers)

        self.schedule = CurriculumSchedule(cfg.curriculum, cfg.ablation)
        self.env = ClimbEnv(cfg, n=cfg.train.num_envs, seed=self.seed)
        self.actor_critic, self.estimator = build_networks(cfg.network)
        self.ppo = PPO(self.actor_critic, self.estimator, cfg.ppo, seed=self.seed)
        self.ppo.init_storage(cfg.train.num_envs, ESTIMATOR_INPUT_DIM, PRIVILEGED_DIM)
        self.outcomes: deque[bool] = deque(maxlen=_SUCCESS_WINDOW)
        self.rows: list[dict[str, float]] = []
        self.checkpoints: list[Path] = []

    def _inputs(self, obs: Observation, privileged: np.ndarray) -> tuple[torch.Tensor, ...]:
        est_in = _tensor(obs.estimator_input)
        estimate = self.estimator.inference(est_in)
        policy_obs = _tensor(obs.policy_input(estimate.numpy()))
        critic_obs = torch.cat([policy_obs, _tensor(privileged)], dim=1)
        return policy_obs, critic_obs, est_in, estimate

    def _rollout(self, obs: Observation, privileged: np.ndarray) -> tuple[Observation, np.ndarray, float, int]:
        rewards, finished = [], 0
        for _ in range(self.config.ppo.rollout_steps):
            policy_obs, critic_obs, est_in, estimate = self._inputs(obs, privileged)
            actions = self.ppo.act(policy_obs, critic_obs, est_in, _tensor(privileged))
            result: StepResult = self.env.step(actions.numpy().astype(np.float64), estimate[:, CONTACT_SLICE].numpy())
            self.ppo.process_env_step(
                _tensor(result.rewards), torch.as_tensor(result.dones), torch.as_tensor(result.timeouts)
            )
            self.outcomes.extend(bool(t) for t in result.timeouts[result.dones])
            finished += int(result.dones.sum())
            rewards.append(result.rewards.mean())
            obs, privileged = result.observation, result.privileged
        _, critic_obs, _, _ = self._inputs(obs, privileged)
        self.ppo.compute_returns(critic_obs)
        return obs, privileged, float(np.mean(rewards)), finished

    def _row(
        self, iteration: int, sched: CurriculumState, reward: float, finished: int, stats: UpdateStats | None
    ) -> dict[str, float]:
        nan = float("nan")
        return {
            "iteration": iteration,
            "mean_reward": reward,
            "success_rate": float(np.mean(self.outcomes)) if self.outcomes else nan,
            "episodes": finished,
            "theta": sched.theta,
            "prob_attach": sched.prob_attach,
            "kappa": sched.kappa,
            "phase": sched.phase,
            "surrogate_loss": stats.surrogate_loss if stats else nan,
            "value_loss": stats.value_loss if stats else nan,
            "entropy": stats.entropy if stats else nan,
            "estimator_loss": stats.estimator_loss if stats else nan,
            "kl": stats.kl if stats else nan,
            "aborted": int(stats is None),
        }

    @property
    def curves(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(CURVE_COLUMNS))

    def write_curves(self) -> Path | None:
        if self.run_dir is None:
            return None
        return write_table(self.curves, self.run_dir / Key.run.curves, header_lines(self.config, seed=self.seed))

    def checkpoint(self, iteration: int) -> Path | None:
        if self.run_dir is None:
            return None
        path = self.run_dir / Key.run.checkpoints / Key.run.checkpoint(iteration)
        self.checkpoints.append(save_checkpoint(path, self.config, iteration, self.ppo.state_dict()))
        return path

    def run(
        self, iterations: int | None = None, callback: Callable[[dict[str, float]], None] | None = None
    ) -> pd.DataFrame:
        """
        Train for ``iterations`` (default: the full scaled curriculum).

        Returns
        -------
        The training curves, one row per iteration.
        """
        cfg = self.config
        iterations = cfg.total_iterations if iterations is None else iterations
        if self.run_dir is not None:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            cfg.dump(self.run_dir / Key.run.config)
        logger.info(
            f"Training {iterations} iterations with {cfg.train.num_envs} envs, "
            f"ablation={cfg.ablation.v}, scale={cfg.curriculum.scale}, seed={self.seed}"
        )
        self.env.set_schedule(self.schedule.state(0))
        obs, privileged = self.env.reset()
        phase = None
        for it in range(iterations):
            sched = self.schedule.state(it)
            if sched.phase != phase:
                logger.info(f"Iteration {it}: entering curriculum phase {sched.phase}")
                phase = sched.phase
            self.env.set_schedule(sched)
            obs, privileged, reward, finished = self._rollout(obs, privileged)
            try:
                stats = self.ppo.update()
            except NonFiniteLoss as e:
                logger.warning(f"Iteration {it} aborted: {e}")
                stats = None
            row = self._row(it, sched, reward, finished, stats)
            self.rows.append(row)
            if callback is not None:
                callback(row)
            if it % 10 == 0 or it == iterations - 1:
                logger.info(
                    f"Iteration {it}: reward={reward:.4f} success={row['success_rate']:.3f} "
                    f"theta={sched.theta:.3f} prob={sched.prob_attach:.3f}"
                )
            if cfg.train.checkpoint_interval and (it + 1) % cfg.train.checkpoint_interval == 0:
                self.checkpoint(it + 1)
                self.write_curves()
        interval = cfg.train.checkpoint_interval
        if iterations and (not interval or iterations % interval):
            self.checkpoint(iterations)
        self.write_curves()
        return self.curves


def train(
    config: ClimbConfig | None = None, run_dir: str | Path | None = None, seed: int | None = None, plot: bool = False
) -> pd.DataFrame:
    """Run :class:`Trainer` to completion, optionally rendering the curves next to the tabular file."""
    trainer = Trainer(config, run_dir, seed)
    curves = trainer.run()
    if plot and trainer.run_dir is not None:
        from magclimb._plotting import plot_training_curves

        plot_training_curves(curves, trainer.run_dir / Key.run.curves_plot)
    return curves
