from __future__ import annotations

import configparser
import hashlib
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, get_type_hints

from loguru import logger

from magclimb.constants import config as defaults
from magclimb.constants._constants import Ablation, Activation

__all__ = [
    "ActuationRanges",
    "AdhesionConfig",
    "ClimbConfig",
    "ConfigError",
    "ContactConfig",
    "CurriculumConfig",
    "EvalConfig",
    "NetworkConfig",
    "ObservationConfig",
    "PpoConfig",
    "RewardConfig",
    "RobotConfig",
    "TrainConfig",
    "WallConfig",
    "config_from_text",
    "load_config",
]


class ConfigError(ValueError):
    """Invalid configuration value, section or key."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"Invalid configuration field `{field_name}`: {message}")


@dataclass(frozen=True)
class RobotConfig:
    body_mass: float = 8.0
    foot_mass: float = 0.2
    base_inertia: tuple[float, ...] = (0.02, 0.1, 0.11)
    link_lengths: tuple[float, ...] = (0.08, 0.21, 0.21)
    hip_offset: tuple[float, ...] = (0.19, 0.07)
    joint_limits: tuple[float, ...] = (0.8, 1.6, 2.4)
    nominal_joint: tuple[float, ...] = (0.0, 0.8, -1.323599)
    nominal_ankle_rpy: tuple[float, ...] = (0.0, 0.523599, 0.0)
    actuation_limit: float = 25.0
    joint_armature: float = 0.03
    foot_inertia: float = 2e-4
    pad_radius: float = 0.015

    def validate(self) -> None:
        _positive(self, "body_mass", "foot_mass", "actuation_limit", "joint_armature", "foot_inertia", "pad_radius")
        _length(self, "base_inertia", 3)
        _length(self, "link_lengths", 3)
        _length(self, "hip_offset", 2)
        _length(self, "joint_limits", 3)
        _length(self, "nominal_joint", 3)
        _length(self, "nominal_ankle_rpy", 3)
        if min(self.base_inertia) <= 0 or min(self.link_lengths) <= 0 or min(self.joint_limits) <= 0:
            raise ConfigError("robot", "inertia, link lengths and joint limits must be positive")


@dataclass(frozen=True)
class ContactConfig:
    stiffness: float = 3e4
    damping: float = 300.0
    friction_range: tuple[float, ...] = (0.3, 0.5)
    tangential_stiffness: float = 2e4
    tangential_damping: float = 60.0
    penetration_tol: float = 1e-6

    def validate(self) -> None:
        _positive(self, "stiffness", "damping", "tangential_stiffness", "tangential_damping")
        _range(self, "friction_range", 0.3, 0.5)


@dataclass(frozen=True)
class ActuationRanges:
    base_kp: float = 100.0
    base_kd: float = 2.0
    kp_range: tuple[float, ...] = (0.4, 0.6)
    kd_range: tuple[float, ...] = (0.12, 0.18)
    ankle_kp_range: tuple[float, ...] = (0.04, 0.06)
    ankle_kd_range: tuple[float, ...] = (0.0005, 0.0015)
    delay_range: tuple[float, ...] = (0.0, 0.008)

    def validate(self) -> None:
        _positive(self, "base_kp", "base_kd")
        for name in ("kp_range", "kd_range", "ankle_kp_range", "ankle_kd_range"):
            _range(self, name, 0.0, None, strict=True)
        _range(self, "delay_range", 0.0, 0.008)


@dataclass(frozen=True)
class WallConfig:
    extent: tuple[float, ...] = (-6.0, 6.0, -3.0, 3.0)
    non_ferromagnetic: str = ""

    def validate(self) -> None:
        _length(self, "extent", 4)
        x0, x1, y0, y1 = self.extent
        if x1 <= x0 or y1 <= y0:
            raise ConfigError("wall.extent", "patch must have a positive area")
        self.patches()

    def patches(self) -> list[tuple[float, float, float, float]]:
        """Parse ``non_ferromagnetic`` given as ``x0,x1,y0,y1;x0,x1,y0,y1``."""
        out = []
        for chunk in filter(None, (c.strip() for c in self.non_ferromagnetic.split(";"))):
            try:
                x0, x1, y0, y1 = (float(v) for v in chunk.split(","))
            except ValueError:
                msg = f"expected 4 comma-separated values, found `{chunk}`"
                raise ConfigError("wall.non_ferromagnetic", msg) from None
            if x1 <= x0 or y1 <= y0:
                raise ConfigError("wall.non_ferromagnetic", f"patch `{chunk}` must have a positive area")
            out.append((x0, x1, y0, y1))
        return out


@dataclass(frozen=True)
class AdhesionConfig:
    max_force: float = defaults.EPM_MAX_FORCE
    reference_gap: float = defaults.AIRGAP_REFERENCE_GAP
    ratio_at_reference: float = defaults.AIRGAP_RATIO_AT_REFERENCE
    gap_tol: float = defaults.ALIGNMENT_GAP_TOL
    mu_mag: float = 0.5
    switch_latency: float = defaults.EPM_SWITCH_LATENCY
    contact_threshold: float = defaults.CONTACT_CONFIDENCE_THRESHOLD
    magnet_threshold: float = defaults.MAGNET_ACTION_THRESHOLD
    partial_contact: bool = True
    debounce_time: float = 0.0

    def validate(self) -> None:
        _positive(self, "max_force", "reference_gap", "mu_mag")
        if not 0.0 < self.ratio_at_reference < 1.0:
            raise ConfigError("adhesion.ratio_at_reference", "must lie in (0, 1)")
        for name in ("gap_tol", "switch_latency", "debounce_time"):
            if getattr(self, name) < 0:
                raise ConfigError(f"adhesion.{name}", "must be non-negative")


@dataclass(frozen=True)
class CurriculumConfig:
    scale: float = 1.0
    phase1_end: float = float(defaults.PHASE1_END)
    theta_ramp: float = float(defaults.THETA_RAMP)
    prob_ramp_start: float = float(defaults.PROB_RAMP_START)
    prob_ramp: float = float(defaults.PROB_RAMP)
    prob_floor: float = defaults.PROB_FLOOR
    smoothness_start: float = float(defaults.SMOOTHNESS_START)
    kappa_base: float = defaults.KAPPA_BASE
    adhesion_in_phase1: bool = True
    stage_limit: int = 3

    def validate(self) -> None:
        if not 0.0 < self.scale <= 1.0:
            raise ConfigError("curriculum.scale", f"expected a value in (0, 1], found `{self.scale}`")
        _positive(self, "theta_ramp", "prob_ramp", "kappa_base")
        if self.prob_ramp_start < self.phase1_end:
            raise ConfigError("curriculum.prob_ramp_start", "must not precede the end of the flat-ground phase")
        if not 0.0 <= self.prob_floor <= 1.0:
            raise ConfigError("curriculum.prob_floor", "must lie in [0, 1]")
        if self.stage_limit not in (1, 2, 3):
            raise ConfigError("curriculum.stage_limit", f"expected 1, 2 or 3, found `{self.stage_limit}`")


@dataclass(frozen=True)
class RewardConfig:
    velocity_weight: float = 3.0
    velocity_sharpness: float = 5.0
    standing_weight: float = 0.5
    gait_weight: float = 0.5
    foot_height_weight: float = 0.5
    swing_height: float = defaults.SWING_HEIGHT
    foot_slip_weight: float = 0.5
    foot_clearance_weight: float = 140.0
    orientation_weight: float = 3.0
    torque_weight: float = 0.003
    joint_position_weight_standing: float = 3.0
    joint_position_weight_moving: float = 0.75
    joint_speed_weight: float = 0.003
    joint_acceleration_weight: float = 0.003
    smoothness1_weight: float = 2.5
    smoothness2_weight: float = 1.2
    base_motion_weight: float = 3.0
    magnet_weight: float = 0.15
    penalty_scale: float = 0.2

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"reward.{f.name}", "must be non-negative")


@dataclass(frozen=True)
class ObservationConfig:
    filter_alpha: float = defaults.FILTER_ALPHA
    gait_period: float = defaults.GAIT_PERIOD
    noise: bool = True
    orientation_noise: float = 0.05
    orientation_bias: float = 0.05
    joint_pos_noise: float = 0.1
    ang_vel_noise: float = 0.1
    joint_vel_noise: float = 0.5
    target_history_noise: float = 0.1
    foot_pos_noise: float = 0.015

    def validate(self) -> None:
        if not 0.0 < self.filter_alpha <= 1.0:
            raise ConfigError("observation.filter_alpha", "must lie in (0, 1]")
        _positive(self, "gait_period")
        for name in ("orientation_noise", "orientation_bias", "joint_pos_noise", "ang_vel_noise",
                     "joint_vel_noise", "target_history_noise", "foot_pos_noise"):  # fmt: skip
            if getattr(self, name) < 0:
                raise ConfigError(f"observation.{name}", "must be non-negative")


@dataclass(frozen=True)
class NetworkConfig:
    actor_hidden: tuple[int, ...] = (256, 128, 64)
    critic_hidden: tuple[int, ...] = (256, 128, 64)
    estimator_hidden: tuple[int, ...] = (256, 128)
    activation: str = Activation.TANH.v
    init_noise_std: float = 0.5
    actor_output_gain: float = 0.01
    joint_action_scale: float = 0.25

    def validate(self) -> None:
        try:
            Activation(self.activation)
        except ValueError as e:
            raise ConfigError("network.activation", str(e)) from None
        for name in ("actor_hidden", "critic_hidden", "estimator_hidden"):
            if not getattr(self, name) or min(getattr(self, name)) < 1:
                raise ConfigError(f"network.{name}", "layer sizes must be positive")
        _positive(self, "init_noise_std", "actor_output_gain", "joint_action_scale")


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    learning_rate: float = 3e-4
    rollout_steps: int = 100
    epochs: int = 4
    minibatches: int = 4
    entropy_coef: float = 0.005
    estimator_weight: float = 1.0
    value_coef: float = 1.0
    max_grad_norm: float = 1.0

    def validate(self) -> None:
        if not 0.0 < self.clip < 1.0:
            raise ConfigError("ppo.clip", "must lie in (0, 1)")
        for name in ("gamma", "lam"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"ppo.{name}", "must lie in (0, 1]")
        for name in ("rollout_steps", "epochs", "minibatches"):
            if getattr(self, name) < 1:
                raise ConfigError(f"ppo.{name}", "must be at least 1")
        _positive(self, "learning_rate", "max_grad_norm")


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    num_envs: int = 16
    iterations: int = 0
    checkpoint_interval: int = 50
    episode_length: float = defaults.EPISODE_LENGTH
    command_ranges: tuple[float, ...] = defaults.COMMAND_RANGES
    ablation: str = Ablation.FULL.v
    oracle_contact: bool = False
    workers: int = 1

    def validate(self) -> None:
        if self.num_envs < 1:
            raise ConfigError("train.num_envs", "at least one environment is required")
        if self.iterations < 0 or self.checkpoint_interval < 1 or self.workers < 1:
            raise ConfigError("train", "iterations must be non-negative, interval and workers positive")
        _positive(self, "episode_length")
        _length(self, "command_ranges", 3)
        try:
            Ablation(self.ablation)
        except ValueError as e:
            raise ConfigError("train.ablation", str(e)) from None


@dataclass(frozen=True)
class EvalConfig:
    seed: int = 1000
    horizon: float = defaults.EPISODE_LENGTH
    episodes: int = 100
    probs: tuple[float, ...] = defaults.EVAL_PROBS
    recovery_windows: tuple[float, ...] = defaults.RECOVERY_WINDOWS
    frozen_time: float = defaults.FROZEN_TIME
    fall_margin: float = defaults.FALL_MARGIN
    detach_distance: float = defaults.DETACH_DISTANCE
    require_survival: bool = False
    hardware_debounce: bool = False
    workers: int = 1

    def validate(self) -> None:
        _positive(self, "horizon", "frozen_time", "detach_distance")
        if self.episodes < 1 or self.workers < 1:
            raise ConfigError("eval.episodes", "episodes and workers must be at least 1")
        if not self.probs or not all(0.0 <= p <= 1.0 for p in self.probs):
            raise ConfigError("eval.probs", "probabilities must lie in [0, 1]")
        if not self.recovery_windows or min(self.recovery_windows) <= 0:
            raise ConfigError("eval.recovery_windows", "windows must be positive")


_SECTIONS: dict[str, type] = {
    "robot": RobotConfig,
    "contact": ContactConfig,
    "actuation": ActuationRanges,
    "wall": WallConfig,
    "adhesion": AdhesionConfig,
    "curriculum": CurriculumConfig,
    "reward": RewardConfig,
    "observation": ObservationConfig,
    "network": NetworkConfig,
    "ppo": PpoConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class ClimbConfig:
    """Effective configuration of a run, one frozen dataclass per file section."""

    robot: RobotConfig = field(default_factory=RobotConfig)
    contact: ContactConfig = field(default_factory=ContactConfig)
    actuation: ActuationRanges = field(default_factory=ActuationRanges)
    wall: WallConfig = field(default_factory=WallConfig)
    adhesion: AdhesionConfig = field(default_factory=AdhesionConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> ClimbConfig:
        for name in _SECTIONS:
            getattr(self, name).validate()
        return self

    @property
    def ablation(self) -> Ablation:
        return Ablation(self.train.ablation)

    @property
    def total_iterations(self) -> int:
        """Training iterations, derived from the scaled curriculum length when not set explicitly."""
        if self.train.iterations:
            return self.train.iterations
        return max(1, round(defaults.CURRICULUM_END * self.curriculum.scale))

    def to_text(self) -> str:
        """Canonical INI text: sections and keys in declaration order."""
        lines = []
        for name in _SECTIONS:
            section = getattr(self, name)
            lines.append(f"[{name}]")
            lines.extend(f"{f.name} = {_format_value(getattr(section, f.name))}" for f in fields(section))
            lines.append("")
        return "\n".join(lines)

    @property
    def config_hash(self) -> str:
        """First 12 hex digits of the SHA-256 of :meth:`to_text`."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:12]

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        logger.debug(f"Wrote configuration snapshot to {path}")
        return path

    def with_overrides(self, overrides: Mapping[str, Any]) -> ClimbConfig:
        """Return a copy with ``{"section.key": value}`` overrides applied and validated."""
        sections = {name: getattr(self, name) for name in _SECTIONS}
        for dotted, value in overrides.items():
            if value is None:
                continue
            section_name, key = _split_key(dotted)
            section = sections[section_name]
            sections[section_name] = replace(section, **{key: _coerce(section, key, value, dotted)})
        return ClimbConfig(**sections).validate()


def load_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None, base: ClimbConfig | None = None
) -> ClimbConfig:
    """
    Load the run configuration.

    Parameters
    ----------
    path
        Optional INI file. Sections and keys must be known; missing keys keep their defaults.
    overrides
        Mapping of ``"section.key"`` to values, typically command line flags. ``None`` values are skipped.
    base
        Configuration the file and overrides are applied to, the defaults if ``None``.

    Returns
    -------
    The validated configuration, with precedence flags > file > base.
    """
    config = base or ClimbConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file `{path}` does not exist")
        logger.info(f"Reading configuration {path}")
        config = config.with_overrides(_read_ini(path.read_text(encoding="utf-8")))
    return config.with_overrides(overrides or {}).validate()


def config_from_text(text: str) -> ClimbConfig:
    """Parse a configuration written by :meth:`ClimbConfig.to_text`, e.g. the snapshot stored in a checkpoint."""
    return ClimbConfig().with_overrides(_read_ini(text))


def _read_ini(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", str(e)) from None
    return {f"{s}.{k}": v for s in parser.sections() for k, v in parser[s].items()}


def _split_key(dotted: str) -> tuple[str, str]:
    section_name, _, key = dotted.partition(".")
    if section_name not in _SECTIONS:
        raise ConfigError(dotted, f"unknown section `{section_name}`. Valid sections are: `{list(_SECTIONS)}`")
    if key not in {f.name for f in fields(_SECTIONS[section_name])}:
        raise ConfigError(dotted, f"unknown key `{key}` in section `{section_name}`")
    return section_name, key


def _coerce(section: Any, key: str, value: Any, name: str) -> Any:
    hint = get_type_hints(type(section))[key]
    try:
        if hint is bool:
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                    raise ValueError(f"not a boolean: `{value}`")
                return configparser.ConfigParser.BOOLEAN_STATES[lowered]
            return bool(value)
        if hint in (int, float, str):
            return hint(value.strip() if isinstance(value, str) else value)
        # tuple[float, ...] or tuple[int, ...]
        item = hint.__args__[0]
        items = value.split(",") if isinstance(value, str) else value
        return tuple(item(v.strip() if isinstance(v, str) else v) for v in items if not isinstance(v, str) or v.strip())
    except (TypeError, ValueError) as e:
        raise ConfigError(name, str(e)) from None


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _positive(section: Any, *names: str) -> None:
    for name in names:
        if not getattr(section, name) > 0:
            raise ConfigError(f"{_qualify(section, name)}", f"must be positive, found `{getattr(section, name)}`")


def _length(section: Any, name: str, n: int) -> None:
    if len(getattr(section, name)) != n:
        raise ConfigError(f"{_qualify(section, name)}", f"expected {n} values, found `{getattr(section, name)}`")


def _range(section: Any, name: str, lo: float | None, hi: float | None, strict: bool = False) -> None:
    value = getattr(section, name)
    _length(section, name, 2)
    a, b = value
    if a > b or (strict and a <= 0) or (lo is not None and a < lo) or (hi is not None and b > hi):
        raise ConfigError(f"{_qualify(section, name)}", f"invalid range `{value}`")


def _qualify(section: Any, name: str) -> str:
    for section_name, cls in _SECTIONS.items():
        if isinstance(section, cls):
            return f"{section_name}.{name}"
    return name
