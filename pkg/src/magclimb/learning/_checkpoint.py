from __future__ import annotations

import pickle
from pathlib import Path
from typing import Any

import numpy as np
import torch
from loguru import logger

from magclimb._config import ClimbConfig, ConfigError, NetworkConfig, config_from_text
from magclimb._env import ACTION_DIM, PRIVILEGED_DIM
from magclimb._observation import ESTIMATOR_INPUT_DIM, ESTIMATOR_OUTPUT_DIM, OBSERVATION_DIM, Observation
from magclimb.constants._pkg_constants import Key
from magclimb.learning._networks import ActorCritic, Estimator
from magclimb.utils._utils import artifact_version

__all__ = ["CheckpointError", "Policy", "build_networks", "load_checkpoint", "save_checkpoint"]

_CONFIG_TEXT = "config"


class CheckpointError(RuntimeError):
    """Unreadable checkpoint, or one written by another configuration or package version."""


def build_networks(config: NetworkConfig | None = None) -> tuple[ActorCritic, Estimator]:
    cfg = config or NetworkConfig()
    actor_critic = ActorCritic(OBSERVATION_DIM, OBSERVATION_DIM + PRIVILEGED_DIM, ACTION_DIM, cfg)
    estimator = Estimator(ESTIMATOR_INPUT_DIM, ESTIMATOR_OUTPUT_DIM, cfg)
    return actor_critic, estimator


def save_checkpoint(
    path: str | Path, config: ClimbConfig, iteration: int, state: dict[str, Any]
) -> Path:
    """Write ``state`` (network and optimiser state dicts) together with the configuration snapshot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {
        Key.checkpoint.config_hash: config.config_hash,
        Key.checkpoint.version: artifact_version(),
        Key.checkpoint.iteration: iteration,
        _CONFIG_TEXT: config.to_text(),
        **state,
    }
    torch.save(blob, path)
    logger.info(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: str | Path, expected_hash: str | None = None) -> tuple[ClimbConfig, dict[str, Any]]:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Parameters
    ----------
    path
        Checkpoint file.
    expected_hash
        Configuration hash the checkpoint must carry, if given.

    Returns
    -------
    The embedded configuration and the raw checkpoint dictionary.

    Raises
    ------
    CheckpointError
        If the file is missing or unreadable, the embedded configuration does not reproduce its hash, the hash
        differs from ``expected_hash`` or the package version differs.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint `{path}` does not exist.")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
        config = config_from_text(blob[_CONFIG_TEXT])
        stored_hash, version = blob[Key.checkpoint.config_hash], blob[Key.checkpoint.version]
    except (OSError, RuntimeError, KeyError, TypeError, ConfigError, EOFError, pickle.UnpicklingError) as e:
        raise CheckpointError(f"Unreadable checkpoint `{path}`: {e}") from None
    if config.config_hash != stored_hash:
        raise CheckpointError(f"Checkpoint `{path}` is corrupt: configuration does not match hash `{stored_hash}`.")
    if expected_hash is not None and stored_hash != expected_hash:
        raise CheckpointError(f"Checkpoint `{path}` has configuration `{stored_hash}`, expected `{expected_hash}`.")
    if version != artifact_version():
        raise CheckpointError(f"Checkpoint `{path}` was written by version `{version}`, running `{artifact_version()}`.")
    logger.debug(f"Loaded checkpoint {path} at iteration {blob[Key.checkpoint.iteration]}")
    return config, blob


class Policy:
    """Deterministic controller: the estimator feeds the actor mean and supplies the contact confidence."""

    def __init__(self, actor_critic: ActorCritic, estimator: Estimator):
        self.actor_critic = actor_critic.eval()
        self.estimator = estimator.eval()

    @classmethod
    def from_checkpoint(cls, path: str | Path, network: NetworkConfig | None = None) -> tuple[Policy, ClimbConfig]:
        config, blob = load_checkpoint(path)
        if network is not None and network != config.network:
            raise CheckpointError(f"Checkpoint `{path}` was trained with a different network configuration.")
        actor_critic, estimator = build_networks(config.network)
        actor_critic.load_state_dict(blob[Key.checkpoint.actor_critic])
        estimator.load_state_dict(blob[Key.checkpoint.estimator])
        return cls(actor_critic, estimator), config

    def __call__(self, obs: Observation) -> tuple[np.ndarray, np.ndarray]:
        """Return actions ``(n, 16)`` and the estimate ``(n, 11)`` whose last four entries are contact probabilities."""
        with torch.no_grad():
            estimate = self.estimator(torch.as_tensor(obs.estimator_input, dtype=torch.float32))
            policy_obs = torch.as_tensor(obs.policy_input(estimate.numpy()), dtype=torch.float32)
            actions = self.actor_critic.act_inference(policy_obs)
        return actions.numpy().astype(np.float64), estimate.numpy().astype(np.float64)
