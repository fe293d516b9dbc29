from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from magclimb._config import NetworkConfig
from magclimb.constants._constants import Activation

__all__ = ["ActorCritic", "Estimator", "get_activation", "mlp", "mlp_parameter_count"]

CONTACT_SLICE = slice(7, 11)


def get_activation(name: str | Activation) -> nn.Module:
    return {
        Activation.TANH: nn.Tanh,
        Activation.ELU: nn.ELU,
        Activation.SELU: nn.SELU,
        Activation.RELU: nn.ReLU,
        Activation.LRELU: nn.LeakyReLU,
        Activation.SIGMOID: nn.Sigmoid,
    }[Activation(name)]()


def mlp(
    input_dim: int,
    hidden: Sequence[int],
    output_dim: int,
    activation: str | Activation = Activation.TANH,
    output_gain: float = 1.0,
) -> nn.Sequential:
    """
    Fully connected network with orthogonal initialisation.

    Hidden layers use gain ``sqrt(2)``, the output layer ``output_gain``; all biases start at zero.
    """
    sizes = [input_dim, *hidden]
    layers: list[nn.Module] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        linear = nn.Linear(a, b)
        nn.init.orthogonal_(linear.weight, gain=np.sqrt(2.0))
        nn.init.zeros_(linear.bias)
        layers += [linear, get_activation(activation)]
    head = nn.Linear(sizes[-1], output_dim)
    nn.init.orthogonal_(head.weight, gain=output_gain)
    nn.init.zeros_(head.bias)
    layers.append(head)
    return nn.Sequential(*layers)


def mlp_parameter_count(input_dim: int, hidden: Sequence[int], output_dim: int) -> int:
    sizes = [input_dim, *hidden, output_dim]
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def _check_finite(x: torch.Tensor, name: str) -> None:
    if not torch.isfinite(x).all():
        raise ValueError(f"Non-finite values in `{name}`.")


class ActorCritic(nn.Module):
    """
    Gaussian policy with a state-independent deviation and a value network.

    The critic additionally sees the privileged state, so its input is wider than the actor's.
    """

    def __init__(self, obs_dim: int, critic_obs_dim: int, action_dim: int, config: NetworkConfig | None = None):
        super().__init__()
        cfg = config or NetworkConfig()
        self.obs_dim, self.critic_obs_dim, self.action_dim = obs_dim, critic_obs_dim, action_dim
        self.actor = mlp(obs_dim, cfg.actor_hidden, action_dim, cfg.activation, cfg.actor_output_gain)
        self.critic = mlp(critic_obs_dim, cfg.critic_hidden, 1, cfg.activation)
        self.std = nn.Parameter(cfg.init_noise_std * torch.ones(action_dim))
        self.distribution: Normal | None = None

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.act_inference(obs)

    @property
    def action_mean(self) -> torch.Tensor:
        return self.distribution.mean

    @property
    def action_std(self) -> torch.Tensor:
        return self.distribution.stddev

    @property
    def entropy(self) -> torch.Tensor:
        return self.distribution.entropy().sum(dim=-1)

    def update_distribution(self, obs: torch.Tensor) -> Normal:
        _check_finite(obs, "obs")
        mean = self.actor(obs)
        self.distribution = Normal(mean, mean * 0.0 + self.std, validate_args=False)
        return self.distribution

    def act(self, obs: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
        dist = self.update_distribution(obs)
        noise = torch.randn(dist.mean.shape, generator=generator, dtype=dist.mean.dtype)
        return (dist.mean + noise * dist.stddev).detach()

    def get_actions_log_prob(self, actions: torch.Tensor) -> torch.Tensor:
        return self.distribution.log_prob(actions).sum(dim=-1)

    def act_inference(self, obs: torch.Tensor) -> torch.Tensor:
        _check_finite(obs, "obs")
        return self.actor(obs)

    def evaluate(self, critic_obs: torch.Tensor) -> torch.Tensor:
        return self.critic(critic_obs)


class Estimator(nn.Module):
    """
    Regresses privileged state from proprioception and the gait clock.

    Outputs base velocity (3), foot heights (4) and contact probabilities (4); the contact head is squashed
    with a sigmoid.
    """

    def __init__(self, input_dim: int, output_dim: int = 11, config: NetworkConfig | None = None):
        super().__init__()
        cfg = config or NetworkConfig()
        self.input_dim, self.output_dim = input_dim, output_dim
        self.estimator = mlp(input_dim, cfg.estimator_hidden, output_dim, cfg.activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.estimator(x)
        return torch.cat([out[:, :7], torch.sigmoid(out[:, CONTACT_SLICE])], dim=1)

    def inference(self, x: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            return self.forward(x)
