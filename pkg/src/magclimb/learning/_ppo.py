from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, fields

import torch
from loguru import logger
from torch import nn, optim

from magclimb._config import PpoConfig
from magclimb.constants._pkg_constants import Key
from magclimb.learning._networks import ActorCritic, Estimator

__all__ = ["PPO", "NonFiniteLoss", "RolloutStorage", "Transition", "UpdateStats", "fit_estimator", "surrogate_loss"]


class NonFiniteLoss(RuntimeError):
    """A PPO loss evaluated to NaN or infinity; the parameters were left untouched."""


@dataclass
class Transition:
    observations: torch.Tensor | None = None
    critic_observations: torch.Tensor | None = None
    estimator_inputs: torch.Tensor | None = None
    privileged: torch.Tensor | None = None
    actions: torch.Tensor | None = None
    rewards: torch.Tensor | None = None
    dones: torch.Tensor | None = None
    values: torch.Tensor | None = None
    actions_log_prob: torch.Tensor | None = None
    action_mean: torch.Tensor | None = None
    action_sigma: torch.Tensor | None = None

    def clear(self) -> None:
        for f in fields(self):
            setattr(self, f.name, None)


@dataclass
class MiniBatch:
    observations: torch.Tensor
    critic_observations: torch.Tensor
    estimator_inputs: torch.Tensor
    privileged: torch.Tensor
    actions: torch.Tensor
    values: torch.Tensor
    advantages: torch.Tensor
    returns: torch.Tensor
    old_actions_log_prob: torch.Tensor
    old_mu: torch.Tensor
    old_sigma: torch.Tensor


class RolloutStorage:
    """Fixed-size buffer of ``num_transitions`` steps of ``num_envs`` environments."""

    def __init__(
        self,
        num_envs: int,
        num_transitions: int,
        obs_dim: int,
        critic_obs_dim: int,
        action_dim: int,
        estimator_input_dim: int,
        privileged_dim: int,
    ):
        if num_envs < 1 or num_transitions < 1:
            raise ValueError(f"Expected at least one env and step, found `{num_envs}` and `{num_transitions}`.")
        self.num_envs, self.num_transitions = num_envs, num_transitions
        shape = (num_transitions, num_envs)
        self.observations = torch.zeros(*shape, obs_dim)
        self.critic_observations = torch.zeros(*shape, critic_obs_dim)
        self.estimator_inputs = torch.zeros(*shape, estimator_input_dim)
        self.privileged = torch.zeros(*shape, privileged_dim)
        self.actions = torch.zeros(*shape, action_dim)
        self.mu = torch.zeros(*shape, action_dim)
        self.sigma = torch.zeros(*shape, action_dim)
        self.rewards = torch.zeros(*shape, 1)
        self.dones = torch.zeros(*shape, 1, dtype=torch.bool)
        self.values = torch.zeros(*shape, 1)
        self.returns = torch.zeros(*shape, 1)
        self.advantages = torch.zeros(*shape, 1)
        self.actions_log_prob = torch.zeros(*shape, 1)
        self.step = 0

    @property
    def full(self) -> bool:
        return self.step == self.num_transitions

    def add_transitions(self, t: Transition) -> None:
        if self.full:
            raise RuntimeError(f"Rollout buffer overflow after `{self.num_transitions}` steps.")
        i = self.step
        self.observations[i].copy_(t.observations)
        self.critic_observations[i].copy_(t.critic_observations)
        self.estimator_inputs[i].copy_(t.estimator_inputs)
        self.privileged[i].copy_(t.privileged)
        self.actions[i].copy_(t.actions)
        self.rewards[i].copy_(t.rewards.view(-1, 1))
        self.dones[i].copy_(t.dones.view(-1, 1))
        self.values[i].copy_(t.values.view(-1, 1))
        self.actions_log_prob[i].copy_(t.actions_log_prob.view(-1, 1))
        self.mu[i].copy_(t.action_mean)
        self.sigma[i].copy_(t.action_sigma)
        self.step += 1

    def clear(self) -> None:
        self.step = 0

    def compute_returns(self, last_values: torch.Tensor, gamma: float, lam: float) -> None:
        """Generalised advantage estimation, then per-batch advantage normalisation."""
        advantage = torch.zeros_like(last_values)
        for step in reversed(range(self.num_transitions)):
            next_values = last_values if step == self.num_transitions - 1 else self.values[step + 1]
            next_is_not_terminal = 1.0 - self.dones[step].float()
            delta = self.rewards[step] + next_is_not_terminal * gamma * next_values - self.values[step]
            advantage = delta + next_is_not_terminal * gamma * lam * advantage
            self.returns[step] = advantage + self.values[step]
        self.advantages = self.returns - self.values
        self.advantages = (self.advantages - self.advantages.mean()) / (self.advantages.std() + 1e-8)

    def mini_batch_generator(
        self, num_mini_batches: int, num_epochs: int, generator: torch.Generator | None = None
    ) -> Iterator[MiniBatch]:
        batch_size = self.num_envs * self.num_transitions
        mini_batch_size = batch_size // num_mini_batches
        if mini_batch_size < 1:
            raise ValueError(f"Cannot split `{batch_size}` samples into `{num_mini_batches}` minibatches.")
        flat = {
            "observations": self.observations,
            "critic_observations": self.critic_observations,
            "estimator_inputs": self.estimator_inputs,
            "privileged": self.privileged,
            "actions": self.actions,
            "values": self.values,
            "advantages": self.advantages,
            "returns": self.returns,
            "old_actions_log_prob": self.actions_log_prob,
            "old_mu": self.mu,
            "old_sigma": self.sigma,
        }
        flat = {k: v.flatten(0, 1) for k, v in flat.items()}
        for _ in range(num_epochs):
            indices = torch.randperm(num_mini_batches * mini_batch_size, generator=generator)
            for i in range(num_mini_batches):
                idx = indices[i * mini_batch_size : (i + 1) * mini_batch_size]
                yield MiniBatch(**{k: v[idx] for k, v in flat.items()})


def surrogate_loss(
    log_prob: torch.Tensor, old_log_prob: torch.Tensor, advantages: torch.Tensor, clip: float
) -> torch.Tensor:
    """Clipped surrogate objective, negated so that it is minimised."""
    ratio = torch.exp(log_prob - old_log_prob)
    surrogate = -advantages * ratio
    surrogate_clipped = -advantages * torch.clamp(ratio, 1.0 - clip, 1.0 + clip)
    return torch.max(surrogate, surrogate_clipped).mean()


@dataclass
class UpdateStats:
    surrogate_loss: float
    value_loss: float
    entropy: float
    estimator_loss: float
    kl: float
    first_ratio_error: float


class PPO:
    """
    Proximal policy optimisation with a concurrently trained state estimator.

    Policy, value, entropy and estimator terms share one Adam optimiser and one gradient clipping step.
    """

    def __init__(self, actor_critic: ActorCritic, estimator: Estimator, config: PpoConfig | None = None, seed: int = 0):
        self.config = cfg = config or PpoConfig()
        self.actor_critic = actor_critic
        self.estimator = estimator
        self.parameters = [*actor_critic.parameters(), *estimator.parameters()]
        self.optimizer = optim.Adam(self.parameters, lr=cfg.learning_rate)
        self.storage: RolloutStorage | None = None
        self.transition = Transition()
        self.generator = torch.Generator().manual_seed(seed)

    def init_storage(self, num_envs: int, estimator_input_dim: int, privileged_dim: int) -> RolloutStorage:
        ac = self.actor_critic
        self.storage = RolloutStorage(
            num_envs,
            self.config.rollout_steps,
            ac.obs_dim,
            ac.critic_obs_dim,
            ac.action_dim,
            estimator_input_dim,
            privileged_dim,
        )
        return self.storage

    def act(
        self,
        obs: torch.Tensor,
        critic_obs: torch.Tensor,
        estimator_inputs: torch.Tensor,
        privileged: torch.Tensor,
    ) -> torch.Tensor:
        t = self.transition
        with torch.no_grad():
            t.actions = self.actor_critic.act(obs, generator=self.generator)
            t.values = self.actor_critic.evaluate(critic_obs)
            t.actions_log_prob = self.actor_critic.get_actions_log_prob(t.actions)
            t.action_mean = self.actor_critic.action_mean
            t.action_sigma = self.actor_critic.action_std
        t.observations, t.critic_observations = obs, critic_obs
        t.estimator_inputs, t.privileged = estimator_inputs, privileged
        return t.actions

    def process_env_step(self, rewards: torch.Tensor, dones: torch.Tensor, timeouts: torch.Tensor) -> None:
        t = self.transition
        t.rewards = rewards.clone().float()
        t.dones = dones
        # bootstrap episodes cut by the time limit
        t.rewards += self.config.gamma * t.values.squeeze(1) * timeouts.float()
        self.storage.add_transitions(t)
        t.clear()

    def compute_returns(self, last_critic_obs: torch.Tensor) -> None:
        with torch.no_grad():
            last_values = self.actor_critic.evaluate(last_critic_obs)
        self.storage.compute_returns(last_values, self.config.gamma, self.config.lam)

    def update(self) -> UpdateStats:
        """
        Run the configured epochs over the stored rollout.

        Raises
        ------
        NonFiniteLoss
            If any minibatch loss is not finite. The storage is cleared and the remaining minibatches are skipped.
        """
        cfg = self.config
        totals = dict.fromkeys(("surrogate_loss", "value_loss", "entropy", "estimator_loss", "kl"), 0.0)
        first_ratio_error = float("nan")
        n_updates = 0
        try:
            batches = self.storage.mini_batch_generator(cfg.minibatches, cfg.epochs, self.generator)
            for batch in batches:
                ac = self.actor_critic
                ac.update_distribution(batch.observations)
                log_prob = ac.get_actions_log_prob(batch.actions)
                value = ac.evaluate(batch.critic_observations)
                mu, sigma, entropy = ac.action_mean, ac.action_std, ac.entropy.mean()

                advantages = batch.advantages.squeeze(1)
                old_log_prob = batch.old_actions_log_prob.squeeze(1)
                if n_updates == 0:
                    ratio = torch.exp(log_prob - old_log_prob)
                    first_ratio_error = float((ratio - 1.0).abs().max())
                surrogate = surrogate_loss(log_prob, old_log_prob, advantages, cfg.clip)

                value_clipped = batch.values + (value - batch.values).clamp(-cfg.clip, cfg.clip)
                value_loss = torch.max(
                    (value - batch.returns).pow(2), (value_clipped - batch.returns).pow(2)
                ).mean()

                estimator_loss = (self.estimator(batch.estimator_inputs) - batch.privileged).pow(2).mean()

                loss = (
                    surrogate
                    + cfg.value_coef * value_loss
                    - cfg.entropy_coef * entropy
                    + cfg.estimator_weight * estimator_loss
                )
                if not torch.isfinite(loss):
                    raise NonFiniteLoss(f"Non-finite PPO loss at minibatch `{n_updates}`.")

                self.optimizer.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(self.parameters, cfg.max_grad_norm)
                self.optimizer.step()

                with torch.no_grad():
                    kl = torch.sum(
                        torch.log(sigma / batch.old_sigma + 1.0e-5)
                        + (batch.old_sigma.square() + (batch.old_mu - mu).square()) / (2.0 * sigma.square())
                        - 0.5,
                        dim=-1,
                    ).mean()
                totals["surrogate_loss"] += surrogate.item()
                totals["value_loss"] += value_loss.item()
                totals["entropy"] += entropy.item()
                totals["estimator_loss"] += estimator_loss.item()
                totals["kl"] += kl.item()
                n_updates += 1
        finally:
            self.storage.clear()
        stats = UpdateStats(**{k: v / max(n_updates, 1) for k, v in totals.items()}, first_ratio_error=first_ratio_error)
        logger.debug(
            f"PPO update: surrogate={stats.surrogate_loss:.4g} value={stats.value_loss:.4g} "
            f"estimator={stats.estimator_loss:.4g} kl={stats.kl:.3g}"
        )
        return stats

    def state_dict(self) -> dict[str, object]:
        return {
            Key.checkpoint.actor_critic: self.actor_critic.state_dict(),
            Key.checkpoint.estimator: self.estimator.state_dict(),
            Key.checkpoint.optimizer: self.optimizer.state_dict(),
            Key.checkpoint.generator: self.generator.get_state(),
        }

    def load_state_dict(self, state: dict[str, object]) -> None:
        self.actor_critic.load_state_dict(state[Key.checkpoint.actor_critic])
        self.estimator.load_state_dict(state[Key.checkpoint.estimator])
        self.optimizer.load_state_dict(state[Key.checkpoint.optimizer])
        self.generator.set_state(state[Key.checkpoint.generator])


def fit_estimator(
    estimator: Estimator, inputs: torch.Tensor, labels: torch.Tensor, epochs: int = 10, learning_rate: float = 1e-2
) -> list[float]:
    """Full-batch gradient descent of the estimator on a frozen dataset; returns the loss before every epoch."""
    optimizer = optim.SGD(estimator.parameters(), lr=learning_rate)
    losses = []
    for _ in range(epochs):
        loss = (estimator(inputs) - labels).pow(2).mean()
        losses.append(loss.item())
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return losses
