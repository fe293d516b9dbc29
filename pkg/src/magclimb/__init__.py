from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("magclimb")
except PackageNotFoundError:
    __version__ = "0.0.0"

from packaging.version import parse

try:
    __full_version__ = parse(__version__)
    __full_version__ = f"{__version__}+{__full_version__.local}" if __full_version__.local else __version__
except ImportError:
    __full_version__ = __version__

del version, parse, PackageNotFoundError

from magclimb._adhesion import (  # noqa: E402
    AdhesionModel,
    AttachDecision,
    EpmFoot,
    GateInputs,
    airgap_force,
    gate_adhesion,
    holding_force,
    switch_epm,
)
from magclimb._config import ClimbConfig, ConfigError, config_from_text, load_config  # noqa: E402
from magclimb._curriculum import (  # noqa: E402
    CurriculumSchedule,
    CurriculumState,
    gravity_of,
    kappa_of,
    phase_of,
    prob_attach_of,
    theta_of,
)
from magclimb._dynamics import ActionDelayBuffer, NonFiniteState, apply_action_delay, step  # noqa: E402
from magclimb._env import ClimbEnv, StepResult  # noqa: E402
from magclimb._kinematics import forward_kinematics, inverse_kinematics  # noqa: E402
from magclimb._model import ActuationConfig, RobotModel, RobotState, SurfacePatch, WallEnvironment  # noqa: E402
from magclimb._observation import ClockEncoding, NoiseModel, ObservationModel, clock_encode, low_pass  # noqa: E402
from magclimb._reward import RewardBreakdown, RewardInputs, compute_rewards, gait_indicator  # noqa: E402
from magclimb.evaluation import CorruptLogError, EpisodeLog, EvalProtocol, evaluate, replay, run_episode  # noqa: E402
from magclimb.learning import CheckpointError, NonFiniteLoss, Policy, Trainer, train  # noqa: E402
