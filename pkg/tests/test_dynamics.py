import numpy as np
import pytest

from magclimb._config import ActuationRanges
from magclimb._dynamics import (
    ActionDelayBuffer,
    NonFiniteState,
    alignment_error,
    alignment_gap,
    apply_action_delay,
    friction_force,
    joint_torques,
    step,
)
from magclimb._model import ActuationConfig, RobotState, WallEnvironment

from .conftest import SEED

DT = 0.002


def _wall(n: int, gravity=(0.0, 0.0, -9.81)) -> WallEnvironment:
    return WallEnvironment.from_config(n=n, gravity=gravity)


def _hold(model, n: int) -> np.ndarray:
    return np.tile(model.nominal_joint_config, (n, 1))


def test_free_fall(model):
    state = RobotState.nominal(model, 2, base_pos=[0.0, 0.0, 2.0])
    env, act = _wall(2), ActuationConfig.nominal(2)
    for _ in range(10):
        state = step(model, state, env, act, _hold(model, 2), np.zeros((2, 4, 3)), DT)
    np.testing.assert_allclose(state.base_lin_vel, np.tile([0.0, 0.0, -9.81 * 10 * DT], (2, 1)), atol=1e-9)
    np.testing.assert_allclose(state.base_ang_vel, 0.0, atol=1e-9)
    np.testing.assert_allclose(state.time, 10 * DT)
    assert not state.contact.any()


def test_standing_on_flat_ground(model, nominal_state):
    env, act = _wall(4), ActuationConfig.nominal(4)
    state = nominal_state
    for _ in range(250):
        state = step(model, state, env, act, _hold(model, 4), np.zeros((4, 4, 3)), DT)
    assert np.all(np.abs(state.base_pos[:, 2] - model.rest_height) < 0.05)
    assert np.all(np.abs(state.base_pos[:, :2]) < 0.05)
    assert state.contact.all()
    # feet carry the weight
    np.testing.assert_allclose(state.normal_force.sum(axis=1), model.total_mass * 9.81, rtol=0.1)


def test_contact_never_pulls_without_magnet(model, nominal_state):
    env, act = _wall(4, gravity=(0.0, 0.0, 9.81)), ActuationConfig.nominal(4)
    state = step(model, nominal_state, env, act, _hold(model, 4), np.zeros((4, 4, 3)), DT)
    assert np.all(state.normal_force >= 0.0)
    np.testing.assert_array_equal(state.adhesion_pull, 0.0)
    assert np.all(state.base_lin_vel[:, 2] > 0.0)


def test_magnet_holds_against_peeling(model, nominal_state):
    # gravity pulls away from the wall; the magnets hold the robot on it
    env, act = _wall(4, gravity=(0.0, 0.0, 9.81)), ActuationConfig.nominal(4)
    pull = np.zeros((4, 4, 3))
    pull[..., 2] = -697.0
    state = nominal_state
    for _ in range(100):
        state = step(model, state, env, act, _hold(model, 4), pull, DT)
    assert np.all(state.base_pos[:, 2] < model.rest_height + 0.05)
    assert np.all(state.adhesion_pull.sum(axis=1) > 0.0)
    assert np.all(state.adhesion_pull <= 697.0 + 1e-9)


def test_invalid_step_arguments(model, nominal_state):
    env, act = _wall(4), ActuationConfig.nominal(4)
    with pytest.raises(ValueError, match="dt"):
        step(model, nominal_state, env, act, _hold(model, 4), np.zeros((4, 4, 3)), 0.02)
    forces = np.full((4, 4, 3), np.nan)
    with pytest.raises(ValueError, match="finite"):
        step(model, nominal_state, env, act, _hold(model, 4), forces, DT)


def test_non_finite_state_is_reported(model, nominal_state, mocker):
    mocker.patch("magclimb._dynamics.nonfinite_rows", return_value=np.array([1, 3]))
    env, act = _wall(4), ActuationConfig.nominal(4)
    with pytest.raises(NonFiniteState, match=r"\[1, 3\]") as err:
        step(model, nominal_state, env, act, _hold(model, 4), np.zeros((4, 4, 3)), DT)
    np.testing.assert_array_equal(err.value.env_ids, [1, 3])
    assert err.value.state.n == 4


def test_friction_cone():
    demand = np.array([[3.0, 4.0, 0.0], [0.3, 0.4, 0.0]])
    out = friction_force(demand, np.array([2.0, 2.0]), 0.5)
    np.testing.assert_allclose(out[0], [0.6, 0.8, 0.0])
    np.testing.assert_allclose(out[1], demand[1])
    np.testing.assert_array_equal(friction_force(demand, np.array([-1.0, 0.0]), 0.5), 0.0)


def test_joint_torques_saturate(model):
    act = ActuationConfig.nominal(1)
    q = _hold(model, 1)
    tau = joint_torques(model, act, q, np.zeros((1, 12)), q + 10.0)
    np.testing.assert_allclose(tau, model.actuation_limits[None])
    tau = joint_torques(model, act, q, np.zeros((1, 12)), q + 0.01)
    np.testing.assert_allclose(tau, act.kp[0] * 0.01)


def test_alignment_gap(model, nominal_state):
    env = _wall(4)
    np.testing.assert_allclose(alignment_gap(nominal_state, env, model), 0.0, atol=1e-9)
    tilted = nominal_state.copy()
    tilted.ankle_rpy[:, :, 0] += 0.1
    tilted.refresh_kinematics(model)
    gap = alignment_gap(tilted, env, model)
    np.testing.assert_allclose(gap, model.pad_radius * np.sin(0.1), rtol=1e-6)
    angle, rotvec = alignment_error(tilted.foot_normals, env.normal)
    np.testing.assert_allclose(angle, 0.1, rtol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(rotvec, axis=-1), 0.1, rtol=1e-6)


def test_action_delay_interpolates():
    buffer = ActionDelayBuffer(2, dim=1)
    apply_action_delay(buffer, np.zeros((2, 1)), 0.0, now=0.0)
    out = apply_action_delay(buffer, np.ones((2, 1)), np.array([0.0, 0.001]), now=0.002)
    np.testing.assert_allclose(out[:, 0], [1.0, 0.5])
    out = apply_action_delay(buffer, np.full((2, 1), 2.0), np.array([0.002, 0.008]), now=0.004)
    # the oldest sample saturates the lookup
    np.testing.assert_allclose(out[:, 0], [1.0, 0.0])


def test_action_delay_buffer_bounds():
    buffer = ActionDelayBuffer(1, dim=2)
    with pytest.raises(ValueError, match="empty"):
        buffer.query(0.0)
    for k in range(10):
        buffer.push(k * DT, np.full((1, 2), k))
    assert len(buffer) == buffer.capacity
    with pytest.raises(ValueError, match="non-decreasing"):
        buffer.push(0.0, np.zeros((1, 2)))
    with pytest.raises(ValueError, match="0.008"):
        apply_action_delay(buffer, np.zeros((1, 2)), 0.01, now=1.0)
    buffer.reset([0], np.full(2, -1.0))
    np.testing.assert_array_equal(buffer.query(0.0), [[-1.0, -1.0]])


def test_actuation_validation():
    with pytest.raises(ValueError, match="delay"):
        ActuationConfig(joint_kp=[0.5], joint_kd=[0.15], ankle_kp=[0.05], ankle_kd=[0.001], action_delay=[0.02])
    with pytest.raises(ValueError, match="positive"):
        ActuationConfig(joint_kp=[0.0], joint_kd=[0.15], ankle_kp=[0.05], ankle_kd=[0.001], action_delay=[0.0])
    act = ActuationConfig.nominal(3)
    act.sample([1], [np.random.default_rng(i) for i in range(3)], ActuationRanges())
    assert 0.4 <= act.joint_kp[1] <= 0.6
    assert 0.0 <= act.action_delay[1] <= 0.008
    assert act.joint_kp[0] == pytest.approx(0.5)
    np.testing.assert_allclose(act.kp, 100.0 * act.joint_kp)


def test_random_rollout_keeps_physical_bounds(model):
    # vertical wall, random joint targets, magnets switched on and off at random
    n, steps = 4, 10_000
    rng = np.random.default_rng(SEED)
    env, act = _wall(n, gravity=(-9.81, 0.0, 0.0)), ActuationConfig.nominal(n)
    env.friction = rng.uniform(0.3, 0.5, n)
    state = RobotState.nominal(model, n)
    targets, pull = _hold(model, n), np.zeros((n, 4, 3))
    for i in range(steps):
        if i % 50 == 0:
            targets = model.clamp(_hold(model, n) + rng.normal(0.0, 0.3, (n, 12)))
            pull = np.zeros((n, 4, 3))
            pull[..., :2] = rng.normal(0.0, 50.0, (n, 4, 2))
            pull[..., 2] = -697.0 * (rng.random((n, 4)) < 0.7)
        state = step(model, state, env, act, targets, pull, DT)
        assert np.all(np.abs(np.linalg.norm(state.base_quat, axis=1) - 1.0) <= 1e-9)
        assert np.all(state.normal_force >= 0.0)
        tangential = state.contact_force - (state.contact_force @ env.normal)[..., None] * env.normal
        cap = env.friction[:, None] * state.normal_force + 1e-9
        assert np.all(np.linalg.norm(tangential, axis=-1) <= cap)
