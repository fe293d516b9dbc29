from dataclasses import replace

import numpy as np
import pytest

from magclimb._config import load_config
from magclimb._curriculum import CurriculumSchedule, CurriculumState
from magclimb._env import ACTION_DIM, PRIVILEGED_DIM, ClimbEnv, update_frozen_timer
from magclimb.constants._constants import GateReason, TerminationCause

from .conftest import SEED


def _hold(env: ClimbEnv, magnet: float = 1.0) -> np.ndarray:
    actions = np.zeros((env.n, ACTION_DIM))
    actions[:, 12:] = magnet
    return actions


def _run_until_done(env: ClimbEnv, steps: int, magnet: float = 1.0):
    for _ in range(steps):
        result = env.step(_hold(env, magnet))
        if result.dones.any():
            return result
    return result


def test_reset_shapes(env):
    obs, privileged = env.reset()
    assert obs.proprio.shape == (4, 66)
    assert obs.estimator_input.shape == (4, 74)
    assert obs.clock.shape == (4, 8)
    assert privileged.shape == (4, PRIVILEGED_DIM)
    np.testing.assert_allclose(privileged[:, :3], 0.0)
    np.testing.assert_allclose(privileged[:, 3:7], 0.0, atol=1e-9)
    np.testing.assert_array_equal(privileged[:, 7:], 1.0)
    assert np.all(np.abs(env.commands) <= np.array([0.5, 0.3, 0.5]))


def test_step_outputs(env, vertical_wall):
    env.set_schedule(vertical_wall)
    env.reset()
    result = env.step(_hold(env))
    assert result.rewards.shape == (4,)
    assert np.isfinite(result.rewards).all()
    assert result.reasons.shape == (4, 4)
    assert result.measured.shape == (4, 3)
    np.testing.assert_allclose(result.time, 0.01)
    assert result.attached.all()
    assert result.force_active.all()
    assert not result.dones.any()


def test_invalid_actions(env):
    env.reset()
    with pytest.raises(ValueError, match="shape"):
        env.step(np.zeros((4, 12)))
    bad = np.zeros((4, ACTION_DIM))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        env.step(bad)


def test_same_seed_same_rollout(quiet_config):
    results = []
    for _ in range(2):
        env = ClimbEnv(quiet_config, n=3, seed=SEED)
        env.set_schedule(CurriculumState.vertical(prob_attach=0.85))
        env.reset()
        rng = np.random.default_rng(0)
        rewards = [env.step(rng.uniform(-1.0, 1.0, (3, ACTION_DIM))).rewards for _ in range(10)]
        results.append(np.stack(rewards))
    np.testing.assert_array_equal(results[0], results[1])


def test_timeout_and_auto_reset(vertical_wall):
    config = load_config(overrides={"train.episode_length": 0.05, "observation.noise": False})
    env = ClimbEnv(config, n=2, seed=SEED, randomize=False)
    env.set_schedule(vertical_wall)
    env.reset()
    result = _run_until_done(env, 10)
    assert result.timeouts.all()
    assert not result.terminated.any()
    np.testing.assert_allclose(result.durations, 0.05)
    np.testing.assert_array_equal(env.episode_time, 0.0)


def test_frozen_after_five_seconds(quiet_config, vertical_wall):
    config = load_config(overrides={"train.episode_length": 20.0}, base=quiet_config)
    env = ClimbEnv(config, n=2, seed=SEED, randomize=False)
    env.set_schedule(vertical_wall)
    env.reset()
    result = _run_until_done(env, 600)
    assert np.all(result.causes == TerminationCause.FROZEN.code)
    assert np.all((result.durations > 5.0) & (result.durations <= 5.0 + 2 * env.control_dt + 1e-9))


def test_falls_without_adhesion(env, vertical_wall):
    env.set_schedule(replace(vertical_wall, adhesion_enabled=False))
    env.reset()
    result = _run_until_done(env, 400)
    assert np.all(result.causes == TerminationCause.FELL.code)
    assert np.all(result.durations < 2.0)


def test_no_probabilistic_never_fails_stochastically():
    config = load_config(overrides={"train.ablation": "no-probabilistic", "observation.noise": False})
    env = ClimbEnv(config, n=4, seed=SEED)
    env.set_schedule(CurriculumSchedule(ablation=config.ablation).state(35000))
    env.reset()
    rng = np.random.default_rng(1)
    for _ in range(50):
        result = env.step(rng.uniform(-1.0, 1.0, (4, ACTION_DIM)))
        assert not np.any(result.reasons == GateReason.STOCHASTIC_FAIL.code)


def test_zero_probability_fails_on_stance(env):
    env.set_schedule(CurriculumState.vertical(prob_attach=0.0))
    env.reset()
    result = env.step(_hold(env))
    stance = result.stance
    assert stance.any()
    assert np.all(result.reasons[stance] == GateReason.STOCHASTIC_FAIL.code)
    assert not result.attached.any()


def test_no_modeling_ignores_misalignment(vertical_wall):
    config = load_config(overrides={"train.ablation": "no-modeling", "observation.noise": False})
    env = ClimbEnv(config, n=2, seed=SEED, randomize=False)
    env.set_schedule(vertical_wall)
    env.reset()
    env.state.ankle_rpy[:, :, 0] += 0.3
    env.state.refresh_kinematics(env.model)
    result = env.step(_hold(env))
    assert result.attached.all()
    np.testing.assert_allclose(env._last.pull, 697.0)


def test_schedule_applies_at_reset(env, flat_ground, vertical_wall):
    env.set_schedule(flat_ground)
    env.reset()
    env.set_schedule(vertical_wall)
    np.testing.assert_allclose(env.wall.gravity[0], [0.0, 0.0, -9.81], atol=1e-12)
    env.reset([0])
    np.testing.assert_allclose(env.wall.gravity[0], [-9.81, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(env.wall.gravity[1], [0.0, 0.0, -9.81], atol=1e-12)
    with pytest.raises(ValueError, match="probability"):
        env.set_schedule(replace(vertical_wall, prob_attach=2.0))


def test_frozen_timer():
    timer = update_frozen_timer(np.array([1.0, 1.0]), np.array([[True] * 4, [True, False, True, True]]), 0.01)
    np.testing.assert_allclose(timer, [1.01, 0.0])


def test_reset_samples_friction_per_instance(quiet_config):
    env = ClimbEnv(quiet_config, n=16, seed=SEED)
    for _ in range(3):
        env.reset()
        assert np.all((env.wall.friction >= 0.3) & (env.wall.friction <= 0.5))
        assert np.unique(env.wall.friction).size > 1
