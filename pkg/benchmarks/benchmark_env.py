import os

import numpy as np

from magclimb._config import load_config
from magclimb._curriculum import CurriculumState
from magclimb._dynamics import step
from magclimb._env import ACTION_DIM, ClimbEnv
from magclimb._model import ActuationConfig, RobotModel, RobotState, WallEnvironment


class ClimbEnvSuite:
    params = [16] if "PR" in os.environ else [16, 256]

    def setup(self, n: int) -> None:
        self.env = ClimbEnv(load_config(), n=n, seed=0)
        self.env.set_schedule(CurriculumState.vertical(prob_attach=0.85))
        self.env.reset()
        self.actions = np.random.default_rng(0).uniform(-1.0, 1.0, (n, ACTION_DIM))

    def time_step(self, _n: int) -> None:
        self.env.step(self.actions)

    def time_reset(self, _n: int) -> None:
        self.env.reset()


class DynamicsSuite:
    params = [16] if "PR" in os.environ else [16, 256]

    def setup(self, n: int) -> None:
        self.model = RobotModel.from_config()
        self.state = RobotState.nominal(self.model, n)
        self.wall = WallEnvironment.from_config(n=n, gravity=(-9.81, 0.0, 0.0))
        self.actuation = ActuationConfig.nominal(n)
        self.targets = np.tile(self.model.nominal_joint_config, (n, 1))
        self.pull = np.zeros((n, 4, 3))

    def time_physics_step(self, _n: int) -> None:
        step(self.model, self.state, self.wall, self.actuation, self.targets, self.pull, 0.002)
