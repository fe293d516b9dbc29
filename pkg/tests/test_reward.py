import math

import numpy as np
import pytest

from magclimb._curriculum import CurriculumSchedule
from magclimb._reward import PENALTY_TERMS, POSITIVE_TERMS, RewardInputs, compute_rewards, gait_indicator

ITERATIONS = [0, 1000, 1200, 21200, 35000]


def _random_inputs(rng: np.random.Generator, n: int) -> RewardInputs:
    command = rng.uniform(-0.5, 0.5, (n, 3))
    command[rng.uniform(size=n) < 0.2] = 0.0
    body_z = rng.normal(size=(n, 3))
    body_z /= np.linalg.norm(body_z, axis=1, keepdims=True)
    q_nominal = np.tile([0.0, 0.8, -1.323599], 4)
    return RewardInputs(
        command=command,
        lin_vel=rng.normal(0.0, 0.3, (n, 3)),
        ang_vel=rng.normal(0.0, 0.3, (n, 3)),
        phases=rng.uniform(0.0, 2 * np.pi, (n, 4)),
        foot_height=rng.uniform(-0.01, 0.12, (n, 4)),
        foot_vel=rng.normal(0.0, 0.2, (n, 4, 3)),
        contact=rng.uniform(size=(n, 4)) < 0.6,
        tau=rng.normal(0.0, 5.0, (n, 12)),
        q=q_nominal + rng.normal(0.0, 0.1, (n, 12)),
        qd=rng.normal(0.0, 1.0, (n, 12)),
        qdd=rng.normal(0.0, 10.0, (n, 12)),
        q_nominal=q_nominal,
        actions=rng.normal(size=(n, 16)),
        prev_actions=rng.normal(size=(n, 16)),
        prev2_actions=rng.normal(size=(n, 16)),
        magnet_actions=rng.uniform(size=(n, 4)),
        body_z=body_z,
        reference_z=np.array([1.0, 0.0, 0.0]),
    )


def _oracle(x: RewardInputs, i: int, kappa: float, smooth: bool) -> dict[str, float]:
    """Term-by-term recomputation for instance ``i`` with scalar loops."""
    cmd = x.command[i]
    standing = cmd[0] == 0.0 and cmd[1] == 0.0 and cmd[2] == 0.0
    out = {}
    err = (cmd[0] - x.lin_vel[i, 0]) ** 2 + (cmd[1] - x.lin_vel[i, 1]) ** 2
    out["lin_vel"] = (1.5 - 0.5 * kappa) * 3.0 * math.exp(-5.0 * err)
    out["ang_vel"] = (1.5 - 0.5 * kappa) * 3.0 * math.exp(-5.0 * (cmd[2] - x.ang_vel[i, 2]) ** 2)
    sc = g = fh = fs = fc = am = 0.0
    for k in range(4):
        phi = x.phases[i, k] % (2 * math.pi)
        swing = 0.0 < phi < math.pi / 2
        c = bool(x.contact[i, k])
        sc += 1.0 if (c and standing) else -1.0
        g += 1.0 if (swing and not c) or (not swing and c) else -1.0
        p_des = 0.08 if swing else 0.0
        dz2 = (p_des - x.foot_height[i, k]) ** 2
        if swing:
            fh += dz2
        vx, vy, vz = x.foot_vel[i, k]
        fs += float(c) * (vx * vx + vy * vy)
        fc += (1.0 - float(c)) * dz2 * abs(vz) ** 0.5
        am += (float(c) - x.magnet_actions[i, k]) ** 2
    out["standing_contact"] = 0.5 * sc
    out["gait"] = 0.5 * g
    out["foot_height"] = 0.5 * math.exp(-fh)
    out["foot_slip"] = (0.5 + 0.5 * kappa) * 0.5 * fs
    out["foot_clearance"] = 140.0 * fc
    cos = float(np.dot(x.body_z[i], x.reference_z))
    out["orientation"] = 3.0 * math.acos(max(-1.0, min(1.0, cos)))
    out["torque"] = (0.5 + 0.5 * kappa) * 0.003 * sum(t * t for t in x.tau[i])
    alpha = 3.0 if standing else 0.75
    out["joint_position"] = alpha * sum((a - b) ** 2 for a, b in zip(x.q[i], x.q_nominal))
    out["joint_speed"] = 0.003 * sum(v * v for v in x.qd[i])
    out["joint_acceleration"] = 0.003 * sum(v * v for v in x.qdd[i])
    a, a1, a2 = x.actions[i], x.prev_actions[i], x.prev2_actions[i]
    out["smoothness1"] = 2.5 * sum((a - a1) ** 2) if smooth else 0.0
    out["smoothness2"] = 1.2 * sum((a - 2 * a1 + a2) ** 2) if smooth else 0.0
    wx, wy = x.ang_vel[i, 0], x.ang_vel[i, 1]
    out["base_motion"] = 3.0 * math.exp(-0.5 * (wx * wx + wy * wy) + 0.2 * abs(x.lin_vel[i, 2]))
    out["magnet"] = 0.15 * am
    positive = sum(out[k] for k in ("lin_vel", "ang_vel", "standing_contact", "gait", "foot_height"))
    penalty = sum(v for k, v in out.items() if k not in POSITIVE_TERMS)
    out["total"] = positive * math.exp(-0.2 * penalty)
    return out


@pytest.mark.parametrize("t", ITERATIONS)
def test_rewards_match_oracle(t):
    rng = np.random.default_rng(t)
    inputs = _random_inputs(rng, 200)
    sched = CurriculumSchedule().state(t)
    breakdown = compute_rewards(inputs, sched)
    for i in range(inputs.n):
        expected = _oracle(inputs, i, sched.kappa, sched.smoothness_active)
        for name, value in expected.items():
            assert abs(getattr(breakdown, name)[i] - value) <= 1e-9 * max(1.0, abs(value)), (t, i, name)


@pytest.mark.parametrize("t", [0, 500, 999])
def test_smoothness_gated_early(t):
    inputs = _random_inputs(np.random.default_rng(1), 50)
    breakdown = compute_rewards(inputs, CurriculumSchedule().state(t))
    assert np.all(breakdown.smoothness1 == 0.0)
    assert np.all(breakdown.smoothness2 == 0.0)


def test_total_composition():
    inputs = _random_inputs(np.random.default_rng(2), 100)
    breakdown = compute_rewards(inputs, CurriculumSchedule().state(35000))
    np.testing.assert_allclose(breakdown.total, breakdown.positive * np.exp(-0.2 * breakdown.penalty), rtol=1e-12)
    assert set(breakdown.to_frame().columns) == {*POSITIVE_TERMS, *PENALTY_TERMS, "total"}
    assert np.all(breakdown.penalty >= 0)


@pytest.mark.parametrize(
    ("phase", "contact", "expected"),
    [(np.pi / 4, False, 1.0), (np.pi / 4, True, -1.0), (np.pi, True, 1.0), (np.pi, False, -1.0), (0.0, False, -1.0)],
)
def test_gait_indicator(phase, contact, expected):
    assert gait_indicator(phase, contact) == expected


def test_documented_examples():
    inputs = _random_inputs(np.random.default_rng(3), 1)
    inputs.command[:] = 0.0
    inputs.lin_vel[:] = 0.0
    inputs.ang_vel[:, 2] = 0.0
    inputs.phases[:] = np.pi / 4
    inputs.contact[:] = False
    inputs.magnet_actions[:] = 0.0
    inputs.q[:] = inputs.q_nominal
    breakdown = compute_rewards(inputs, CurriculumSchedule().state(0))
    assert breakdown.lin_vel[0] == pytest.approx(3.0)
    assert breakdown.gait[0] == pytest.approx(2.0)
    assert breakdown.magnet[0] == 0.0
    assert breakdown.joint_position[0] == 0.0


def test_leg_permutation_symmetry():
    inputs = _random_inputs(np.random.default_rng(4), 20)
    before = compute_rewards(inputs, CurriculumSchedule().state(21200))
    perm = [2, 0, 3, 1]
    for name in ("phases", "foot_height", "foot_vel", "contact", "magnet_actions"):
        setattr(inputs, name, getattr(inputs, name)[:, perm])
    after = compute_rewards(inputs, CurriculumSchedule().state(21200))
    for name in ("standing_contact", "gait", "foot_height", "foot_slip", "foot_clearance", "magnet"):
        np.testing.assert_allclose(getattr(after, name), getattr(before, name), rtol=1e-12)
