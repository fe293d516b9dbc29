from magclimb.learning._checkpoint import CheckpointError, Policy, build_networks, load_checkpoint, save_checkpoint
from magclimb.learning._networks import ActorCritic, Estimator, get_activation, mlp, mlp_parameter_count
from magclimb.learning._ppo import PPO, NonFiniteLoss, RolloutStorage, UpdateStats, fit_estimator, surrogate_loss
from magclimb.learning._train import CURVE_COLUMNS, Trainer, train

__all__ = [
    "ActorCritic",
    "CURVE_COLUMNS",
    "CheckpointError",
    "Estimator",
    "NonFiniteLoss",
    "PPO",
    "Policy",
    "RolloutStorage",
    "Trainer",
    "UpdateStats",
    "build_networks",
    "fit_estimator",
    "get_activation",
    "load_checkpoint",
    "mlp",
    "mlp_parameter_count",
    "save_checkpoint",
    "surrogate_loss",
    "train",
]
