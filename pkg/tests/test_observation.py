import numpy as np
import pytest

from magclimb._config import ObservationConfig
from magclimb._curriculum import tilt_gravity
from magclimb._observation import (
    CLOCK_DIM,
    ESTIMATOR_INPUT_DIM,
    OBSERVATION_DIM,
    PROPRIO_DIM,
    ClockEncoding,
    NoiseModel,
    ObservationModel,
    clock_encode,
    gait_phases,
    low_pass,
)

from .conftest import RNG


def test_dimensions():
    assert (PROPRIO_DIM, CLOCK_DIM, ESTIMATOR_INPUT_DIM, OBSERVATION_DIM) == (66, 8, 74, 85)


def test_filter_step_response():
    x = np.zeros(1)
    for k in range(1, 51):
        x = low_pass(x, np.ones(1))
        assert abs(x[0] - (1.0 - 0.65**k)) < 1e-12


def test_filter_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        low_pass(np.zeros(3), np.zeros(4))


def test_clock_unit_circle_and_period():
    t = RNG.uniform(0.0, 100.0, 1000)
    enc = clock_encode(t).reshape(-1, 4, 2)
    np.testing.assert_allclose(enc[..., 0] ** 2 + enc[..., 1] ** 2, 1.0, atol=1e-12)
    np.testing.assert_allclose(clock_encode(t + 1.2), clock_encode(t), atol=1e-9)


def test_quarter_period_offsets():
    def unit(angles):
        return np.exp(1j * np.asarray(angles))

    phases = gait_phases(0.0)
    np.testing.assert_allclose(unit(phases), unit([np.pi / 2, np.pi, 3 * np.pi / 2, 0.0]), atol=1e-12)
    later = gait_phases(0.3)
    np.testing.assert_allclose(unit(later), unit([np.pi, 3 * np.pi / 2, 0.0, np.pi / 2]), atol=1e-12)
    assert np.all((phases >= 0) & (phases < 2 * np.pi))


def test_clock_encoding_bundle():
    clock = ClockEncoding.at(np.array([0.0, 0.6]))
    assert clock.phases.shape == (2, 4)
    assert clock.encoding.shape == (2, 8)
    with pytest.raises(ValueError, match="period"):
        gait_phases(0.0, period=0.0)


def test_noise_model():
    assert NoiseModel.zero().is_zero
    noise = NoiseModel.from_config(ObservationConfig())
    assert not noise.is_zero
    bounds = noise.bounds()
    assert bounds.shape == (66,)
    np.testing.assert_array_equal(bounds[48:51], 0.0)
    assert NoiseModel.from_config(ObservationConfig(noise=False)).is_zero


def test_assemble_noise_free(nominal_state):
    model = ObservationModel(4, [np.random.default_rng(i) for i in range(4)], ObservationConfig(noise=False))
    model.reset(np.arange(4))
    targets = np.tile(nominal_state.q[:, None, :], (1, 2, 1))
    gravity = np.tile(tilt_gravity(0.0), (4, 1))
    obs = model.assemble(nominal_state, targets, gravity, np.zeros(4))
    assert obs.proprio.shape == (4, 66)
    assert obs.estimator_input.shape == (4, 74)
    np.testing.assert_allclose(obs.proprio[:, :12], nominal_state.q)
    np.testing.assert_allclose(obs.proprio[:, 48:51], np.tile([0.0, 0.0, -1.0], (4, 1)), atol=1e-12)
    assert obs.policy_input(np.zeros((4, 11))).shape == (4, 85)


def test_filter_restarts_on_reset(nominal_state):
    model = ObservationModel(4, [np.random.default_rng(i) for i in range(4)], ObservationConfig(noise=False))
    model.reset(np.arange(4))
    targets = np.zeros((4, 2, 12))
    gravity = np.tile(tilt_gravity(np.pi / 2), (4, 1))
    model.assemble(nominal_state, targets, gravity, np.zeros(4))
    moved = nominal_state.copy()
    moved.q += 0.1
    obs = model.assemble(moved, targets, gravity, np.full(4, 0.01))
    np.testing.assert_allclose(obs.proprio[:, :12], nominal_state.q + 0.035)
    model.reset([0])
    obs = model.assemble(moved, targets, gravity, np.full(4, 0.02))
    np.testing.assert_allclose(obs.proprio[0, :12], moved.q[0])


def test_noise_is_bounded(nominal_state):
    model = ObservationModel(4, [np.random.default_rng(i) for i in range(4)])
    model.reset(np.arange(4))
    raw = model.raw(nominal_state, np.zeros((4, 2, 12)), np.tile(tilt_gravity(0.0), (4, 1)))
    noisy = model.corrupt(raw)
    assert np.all(np.abs(noisy - raw)[:, :48] <= model.noise.bounds()[:48] + 1e-12)
    np.testing.assert_allclose(np.linalg.norm(noisy[:, 48:51], axis=1), 1.0, atol=1e-12)
