import numpy as np
import pytest

from magclimb._config import CurriculumConfig
from magclimb._curriculum import (
    CurriculumSchedule,
    gravity_of,
    kappa_of,
    phase_of,
    prob_attach_of,
    theta_of,
)
from magclimb.constants._constants import Ablation

from .conftest import RNG

ITERATIONS = [0, 1200, 11200, 21200, 28100, 35000, 10**6]


def _theta(t):
    return float(np.clip(np.pi / 2 * (t - 1200) / 20000, 0.0, np.pi / 2))


def _prob(t):
    return 1.0 - 0.15 * min(max(t - 21200, 0.0), 13800) / 13800


def _kappa(t):
    return 0.99975 ** max(t - 1200, 0.0)


@pytest.mark.parametrize("t", ITERATIONS)
def test_schedule_formulas(t):
    assert abs(theta_of(t) - _theta(t)) < 1e-12
    assert abs(prob_attach_of(t) - _prob(t)) < 1e-12
    assert abs(kappa_of(t) - _kappa(t)) < 1e-12


def test_schedule_anchors():
    assert theta_of(21200) == pytest.approx(np.pi / 2, abs=1e-12)
    assert theta_of(11200) == pytest.approx(np.pi / 4, abs=1e-12)
    assert prob_attach_of(35000) == pytest.approx(0.85, abs=1e-12)
    assert prob_attach_of(21200) == 1.0
    assert kappa_of(1200) == 1.0


def test_gravity_rotation():
    for t in RNG.uniform(0, 40000, 1000):
        assert abs(np.linalg.norm(gravity_of(t)) - 9.81) < 1e-12
    np.testing.assert_allclose(gravity_of(21200), [-9.81, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(gravity_of(0), [0.0, 0.0, -9.81], atol=1e-12)


@pytest.mark.parametrize(
    ("t", "phase", "smooth"),
    [(0, 1, False), (999, 1, False), (1000, 1, True), (1200, 1, True), (1201, 2, True), (21201, 3, True)],
)
def test_phase(t, phase, smooth):
    assert phase_of(t) == (phase, smooth)


def test_negative_iteration():
    with pytest.raises(ValueError, match="non-negative"):
        theta_of(-1)


def test_scaled_schedule_matches_scaled_formulas():
    schedule = CurriculumSchedule(CurriculumConfig(scale=0.01))
    for t in (0, 12, 112, 212, 281, 350):
        assert schedule.theta(t) == pytest.approx(theta_of(t, 0.01), abs=1e-12)
        assert schedule.prob_attach(t) == pytest.approx(prob_attach_of(t, 0.01), abs=1e-12)
        assert schedule.kappa(t) == pytest.approx(kappa_of(t, 0.01), abs=1e-12)
    assert schedule.theta(212) == pytest.approx(np.pi / 2)
    assert schedule.prob_attach(350) == pytest.approx(0.85)


def test_no_curriculum_is_vertical_from_start():
    schedule = CurriculumSchedule(ablation=Ablation.NO_CURRICULUM)
    table = schedule.table(iterations=35000, step=500)
    assert np.all(table["theta"] == np.pi / 2)
    assert table["adhesion_enabled"].all()
    assert table["prob_attach"].iloc[-1] == pytest.approx(0.85)


@pytest.mark.parametrize("ablation", [Ablation.NO_PROBABILISTIC, Ablation.NO_MODELING])
def test_ideal_attachment_ablations(ablation):
    schedule = CurriculumSchedule(ablation=ablation)
    assert all(schedule.prob_attach(t) == 1.0 for t in ITERATIONS)


def test_stage_limit_pins_flat_ground():
    schedule = CurriculumSchedule(CurriculumConfig(scale=0.01, stage_limit=1))
    table = schedule.table(iterations=400, step=1)
    assert np.all(table["theta"] == 0.0)
    assert np.all(table["phase"] == 1)
    assert np.all(table["prob_attach"] == 1.0)


def test_adhesion_in_phase1_switch():
    schedule = CurriculumSchedule(CurriculumConfig(adhesion_in_phase1=False))
    assert not schedule.adhesion_enabled(0)
    assert schedule.adhesion_enabled(1201)
    assert CurriculumSchedule().adhesion_enabled(0)


def test_table_at_and_reward_scales():
    schedule = CurriculumSchedule()
    table = schedule.table_at([11200, 35000])
    assert list(table.columns[:3]) == ["iteration", "theta", "theta_deg"]
    assert table["theta_deg"].iloc[0] == pytest.approx(45.0)
    state = schedule.state(1200)
    assert state.velocity_scale == pytest.approx(1.0)
    assert state.penalty_scale == pytest.approx(1.0)
    late = schedule.state(10**6)
    assert late.velocity_scale == pytest.approx(1.5)
    assert late.penalty_scale == pytest.approx(0.5)


def test_invalid_table_step():
    with pytest.raises(ValueError, match="positive"):
        CurriculumSchedule().table(step=0)
