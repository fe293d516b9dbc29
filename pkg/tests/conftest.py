from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from magclimb._config import ClimbConfig, load_config
from magclimb._curriculum import CurriculumState, tilt_gravity
from magclimb._env import ClimbEnv
from magclimb._model import RobotModel, RobotState

HERE: Path = Path(__file__).parent

SEED = 42

RNG = np.random.default_rng(seed=0)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run slow acceptance tests.")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="Needs --runslow.")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def caplog(caplog):
    handler_id = logger.add(caplog.handler, format="{message}")
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def config() -> ClimbConfig:
    return ClimbConfig().validate()


@pytest.fixture
def quiet_config() -> ClimbConfig:
    """Default configuration without observation noise."""
    return load_config(overrides={"observation.noise": False})


@pytest.fixture
def model() -> RobotModel:
    return RobotModel.from_config()


@pytest.fixture
def nominal_state(model: RobotModel) -> RobotState:
    return RobotState.nominal(model, 4)


@pytest.fixture
def flat_ground() -> CurriculumState:
    """Wall acting as floor, gravity pressing the robot onto it."""
    return CurriculumState(
        iteration=0.0,
        theta=0.0,
        gravity=tuple(tilt_gravity(0.0)),
        prob_attach=1.0,
        kappa=1.0,
        phase=1,
        smoothness_active=False,
        adhesion_enabled=False,
    )


@pytest.fixture
def vertical_wall() -> CurriculumState:
    return CurriculumState.vertical(prob_attach=1.0)


@pytest.fixture
def env(quiet_config: ClimbConfig) -> ClimbEnv:
    return ClimbEnv(quiet_config, n=4, seed=SEED, randomize=False)


class LqrToy:
    """
    Batched one-dimensional regulation task with quadratic cost, used to exercise PPO in isolation.

    ``x' = x + dt u``, reward ``-(x^2 + 0.1 u^2)``; episodes time out after ``horizon`` steps.
    """

    obs_dim = 1
    action_dim = 1

    def __init__(self, n: int = 16, seed: int = SEED, horizon: int = 50, dt: float = 0.1):
        self.n, self.horizon, self.dt = n, horizon, dt
        self.rng = np.random.default_rng(seed)
        self.x = self.rng.uniform(-1.0, 1.0, n)
        self.t = np.zeros(n, dtype=int)

    def observe(self) -> np.ndarray:
        return self.x[:, None].copy()

    def step(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        u = np.clip(u.reshape(self.n), -2.0, 2.0)
        reward = -(self.x**2 + 0.1 * u**2)
        self.x = np.clip(self.x + self.dt * u, -3.0, 3.0)
        self.t += 1
        timeouts = self.t >= self.horizon
        if timeouts.any():
            self.x[timeouts] = self.rng.uniform(-1.0, 1.0, int(timeouts.sum()))
            self.t[timeouts] = 0
        return self.observe(), reward, timeouts.copy(), timeouts.copy()


@pytest.fixture
def lqr_toy() -> LqrToy:
    return LqrToy()
