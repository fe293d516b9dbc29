import itertools
from dataclasses import replace

import numpy as np
import pytest

from magclimb._adhesion import (
    AdhesionModel,
    AttachDecision,
    EpmFoot,
    GateInputs,
    airgap_force,
    gate_adhesion,
    gate_codes,
    holding_force,
    switch_epm,
)
from magclimb._config import AdhesionConfig
from magclimb.constants._constants import GateReason

GRID = list(
    itertools.product(
        [0.4, 0.5, 0.7],  # contact confidence
        [0.4, 0.5, 0.9],  # magnet action
        [0.1, 0.9],  # draw
        [0.0, 2e-3],  # gap
        [False, True],  # ferromagnetic
        [0.85, 1.0],  # attachment probability
    )
)


def _oracle(conf, action, draw, gap, ferro, prob, modeling=True):
    if not conf >= 0.5:
        return GateReason.NO_CONTACT_CONF
    if not action >= 0.5:
        return GateReason.MAGNET_OFF
    if not draw <= prob:
        return GateReason.STOCHASTIC_FAIL
    if modeling and not gap <= 5e-4:
        return GateReason.MISALIGNED
    if not ferro:
        return GateReason.NON_FERROMAGNETIC
    return GateReason.OK


@pytest.mark.parametrize("modeling", [True, False])
def test_gate_truth_table(modeling):
    for conf, action, draw, gap, ferro, prob in GRID:
        expected = _oracle(conf, action, draw, gap, ferro, prob, modeling)
        decision = gate_adhesion(GateInputs(conf, action, gap, ferro, prob, draw), modeling=modeling)
        assert decision.reason is expected, (conf, action, draw, gap, ferro, prob)
        assert decision.attach == (expected is GateReason.OK)


def test_vectorised_gate_matches_scalar():
    cols = [np.array(c) for c in zip(*GRID)]
    conf, action, draw, gap, ferro, prob = cols
    codes = gate_codes(conf, action, draw, prob, gap, ferro)
    expected = [_oracle(*row).code for row in GRID]
    np.testing.assert_array_equal(codes, expected)


def test_sampled_only_on_touchdown():
    g = GateInputs(0.9, 0.9, 0.0, True, 1.0, 0.3)
    assert gate_adhesion(g, foot_in_swing_prev=True).sampled
    assert not gate_adhesion(g, foot_in_swing_prev=False).sampled
    low = replace(g, contact_confidence=0.2)
    assert not gate_adhesion(low, foot_in_swing_prev=True).sampled


@pytest.mark.parametrize("name", ["contact_confidence", "prob_attach", "rng_draw"])
def test_gate_inputs_range(name):
    kwargs = {
        "contact_confidence": 0.5,
        "magnet_action": 0.5,
        "alignment_gap": 0.0,
        "on_ferromagnetic": True,
        "prob_attach": 1.0,
        "rng_draw": 0.5,
    }
    kwargs[name] = 1.5
    with pytest.raises(ValueError, match=name):
        GateInputs(**kwargs)


def test_inconsistent_decision():
    with pytest.raises(ValueError, match="Inconsistent"):
        AttachDecision(attach=True, reason=GateReason.MISALIGNED)


def test_airgap_anchors():
    assert airgap_force(0.0) == 697.0
    assert airgap_force(1e-3) / airgap_force(0.0) == pytest.approx(0.07, abs=0.01)
    forces = airgap_force(np.linspace(0.0, 5e-3, 1000))
    assert np.all(np.diff(forces) <= 0)
    with pytest.raises(ValueError, match="non-negative"):
        airgap_force(-1e-4)


def test_switch_epm_latency():
    foot = EpmFoot()
    foot = switch_epm(foot, True, now=0.0)
    assert not foot.epm_on and foot.pending
    # repeated command keeps the original deadline
    again = switch_epm(foot, True, now=0.004)
    assert again.switch_pending_until == pytest.approx(0.005)
    assert switch_epm(again, True, now=0.005).epm_on


def test_switch_epm_cancel_and_release():
    on = EpmFoot(epm_on=True, attached=True)
    off = switch_epm(on, False, now=1.0)
    assert off.epm_on and off.attached and off.pending
    cancelled = switch_epm(off, True, now=1.002)
    assert cancelled.epm_on and not cancelled.pending
    released = switch_epm(on, False, now=1.0).resolve(1.005)
    assert not released.epm_on and not released.attached


def test_switch_epm_zero_latency():
    assert switch_epm(EpmFoot(), True, now=0.0, latency=0.0).epm_on
    with pytest.raises(ValueError, match="latency"):
        switch_epm(EpmFoot(), True, now=0.0, latency=-1.0)


def test_holding_force_no_modeling_is_full():
    normal = [0.0, 0.0, 1.0]
    foot = EpmFoot(epm_on=True)
    decision = gate_adhesion(GateInputs(0.9, 0.9, 3e-3, True, 1.0, 0.1), modeling=False)
    assert decision.attach
    force = holding_force(foot, decision, 3e-3, normal, modeling=False)
    np.testing.assert_allclose(force, [0.0, 0.0, -697.0])


def test_holding_force_partial_and_shear():
    normal = np.array([0.0, 0.0, 1.0])
    foot = EpmFoot(epm_on=True)
    misaligned = gate_adhesion(GateInputs(0.9, 0.9, 1e-3, True, 1.0, 0.1))
    assert misaligned.reason is GateReason.MISALIGNED
    force = holding_force(foot, misaligned, 1e-3, normal, tangential_load=[1000.0, 0.0, 0.0])
    pull = airgap_force(1e-3)
    assert force[2] == pytest.approx(-pull)
    assert force[0] == pytest.approx(0.5 * pull)
    no_partial = AdhesionConfig(partial_contact=False)
    np.testing.assert_array_equal(holding_force(foot, misaligned, 1e-3, normal, config=no_partial), 0.0)
    np.testing.assert_array_equal(holding_force(EpmFoot(), misaligned, 0.0, normal), 0.0)


def _model(n=2, **kwargs):
    rngs = [np.random.default_rng(i) for i in range(n)]
    model = AdhesionModel(n, rngs, AdhesionConfig(**kwargs))
    model.reset(np.arange(n))
    return model


def _update(model, action=1.0, conf=1.0, gap=0.0, ferro=True, now=0.002):
    shape = (model.n, 4)
    return model.update(
        np.full(shape, action), np.full(shape, conf), np.full(shape, gap), np.full(shape, ferro), now, 0.002
    )


def test_model_attaches_on_aligned_steel():
    model = _model()
    step = _update(model)
    assert step.attached.all()
    np.testing.assert_allclose(step.pull, 697.0)
    assert not step.stochastic_fail.any()


def test_model_no_modeling_ignores_gap():
    model = _model()
    model.modeling = False
    step = _update(model, gap=4e-3)
    assert step.attached.all()
    np.testing.assert_allclose(step.pull, 697.0)


def test_model_zero_probability_fails_stochastically():
    model = _model()
    model.set_prob_attach([0, 1], 0.0)
    step = _update(model)
    assert step.stochastic_fail.all()
    assert not step.attached.any()
    with pytest.raises(ValueError, match="probability"):
        model.set_prob_attach([0], 1.5)


def test_model_disabled_never_pulls():
    model = _model()
    model.set_enabled([1], False)
    step = _update(model)
    assert step.attached[0].all() and not step.attached[1].any()
    np.testing.assert_array_equal(step.pull[1], 0.0)


def test_model_draw_latched_per_stance():
    model = _model()
    first = model.draws.copy()
    _update(model)
    np.testing.assert_array_equal(model.draws, first)
    step = _update(model, conf=0.0, now=0.004)
    assert not step.sampled.any()
    step = _update(model, conf=1.0, now=0.006)
    assert step.sampled.all()
    assert not np.array_equal(model.draws, first)


def test_model_magnet_off_after_latency():
    model = _model()
    _update(model)
    step = _update(model, action=0.0, now=0.004)
    # switch has not taken effect yet; the command is already off
    assert step.epm_on.all()
    assert (step.codes == GateReason.MAGNET_OFF.code).all()
    step = _update(model, action=0.0, now=0.01)
    assert not step.epm_on.any()
    np.testing.assert_array_equal(step.pull, 0.0)


def test_model_debounce_holds_magnet():
    model = _model(n=1, debounce_time=0.02)
    _update(model)
    step = _update(model, action=0.0, conf=0.0, now=0.004)
    assert step.command_on.all()
    for k in range(3, 15):
        step = _update(model, action=0.0, conf=0.0, now=0.002 * k)
    assert not step.command_on.any()


def test_model_generator_count():
    with pytest.raises(ValueError, match="generators"):
        AdhesionModel(2, [np.random.default_rng(0)])


def test_forces_combine_pull_and_shear():
    model = _model(n=1)
    step = _update(model)
    load = np.zeros((1, 4, 3))
    load[..., 0] = 10.0
    load[..., 2] = 50.0
    forces = model.forces(step, np.array([0.0, 0.0, 1.0]), load)
    np.testing.assert_allclose(forces[..., 2], -697.0)
    np.testing.assert_allclose(forces[..., 0], 10.0)
