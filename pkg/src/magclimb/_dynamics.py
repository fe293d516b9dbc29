from __future__ import annotations

from collections import deque
from collections.abc import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from magclimb._config import ContactConfig
from magclimb._kinematics import calf_rotations, leg_jacobians
from magclimb._model import ActuationConfig, RobotModel, RobotState, WallEnvironment
from magclimb.utils._utils import nonfinite_rows

__all__ = [
    "ActionDelayBuffer",
    "NonFiniteState",
    "alignment_error",
    "alignment_gap",
    "apply_action_delay",
    "clip_norm",
    "friction_force",
    "joint_torques",
    "step",
    "tangential_demand",
]

_ACTIVE_SET_ITERATIONS = 4
_NDOF = 18


class NonFiniteState(FloatingPointError):
    """Raised when a physics step produces non-finite values."""

    def __init__(self, env_ids: np.ndarray | Sequence[int], state: RobotState):
        self.env_ids = np.asarray(env_ids, dtype=int)
        self.state = state
        super().__init__(f"Non-finite state in instances `{self.env_ids.tolist()}`.")


def clip_norm(vec: np.ndarray, cap: np.ndarray | float) -> np.ndarray:
    """Scale vectors along the last axis down to a norm of at most ``cap``."""
    norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    cap = np.maximum(np.asarray(cap, dtype=np.float64), 0.0)[..., None] if np.ndim(cap) else max(cap, 0.0)
    scale = np.where(norm > cap, cap / np.maximum(norm, 1e-300), 1.0)
    return vec * scale


def friction_force(demand: np.ndarray, normal_force: np.ndarray, mu: np.ndarray | float) -> np.ndarray:
    """Coulomb friction: the tangential ``demand`` if it lies inside the cone, else its projection onto the cone."""
    return clip_norm(demand, np.asarray(mu) * np.maximum(normal_force, 0.0))


def joint_torques(model: RobotModel, act: ActuationConfig, q: np.ndarray, qd: np.ndarray, targets: np.ndarray):
    """PD torques ``kp (target - q) - kd qd`` clamped to the actuation limits."""
    tau = act.kp[:, None] * (targets - q) - act.kd[:, None] * qd
    return np.clip(tau, -model.actuation_limits, model.actuation_limits)


def tangential_demand(state: RobotState, env: WallEnvironment, contact: ContactConfig) -> np.ndarray:
    """
    Tangential force each foot needs to stay stuck to its anchor point.

    The stick phase is modelled as a stiff spring-damper between the foot and its anchor, projected onto the
    wall plane. Feet that are not engaged have their anchor on the foot itself.
    """
    proj = np.eye(3) - np.outer(env.normal, env.normal)
    offset = (state.foot_pos - state.anchors) @ proj
    vel = state.foot_vel @ proj
    return -contact.tangential_stiffness * offset - contact.tangential_damping * vel


def alignment_error(normals: np.ndarray, wall_normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Angle between each magnet face normal and the inward wall normal, and the world rotation vector closing it.

    Returns
    -------
    Angles of shape ``(n, 4)`` and rotation vectors of shape ``(n, 4, 3)``.
    """
    target = -np.asarray(wall_normal)
    cos = np.clip(normals @ target, -1.0, 1.0)
    angle = np.arccos(cos)
    axis = np.cross(normals, target)
    sin = np.linalg.norm(axis, axis=-1)
    rotvec = np.where((sin > 1e-12)[..., None], axis * (angle / np.maximum(sin, 1e-12))[..., None], 0.0)
    return angle, rotvec


def alignment_gap(state: RobotState, env: WallEnvironment, model: RobotModel) -> np.ndarray:
    """
    Air gap between magnet face and wall: foot height plus the rim lift of a tilted pad.

    The penalty stretch of a pad held in tension is not an air gap; such pads count as flush.
    """
    angle, _ = alignment_error(state.foot_normals, env.normal)
    height = np.where(state.adhesion_pull > 0.0, 0.0, np.maximum(env.height(state.foot_pos), 0.0))
    return height + model.pad_radius * np.sin(np.minimum(angle, np.pi / 2))


def _skew(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape + (3,))
    out[..., 0, 1], out[..., 0, 2] = -v[..., 2], v[..., 1]
    out[..., 1, 0], out[..., 1, 2] = v[..., 2], -v[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -v[..., 1], v[..., 0]
    return out


def _foot_jacobians(r: np.ndarray, jac_world: np.ndarray) -> np.ndarray:
    """Map from generalized velocity ``(v, omega, qd)`` to world foot velocity, shape ``(n, 4, 3, 18)``."""
    n = len(r)
    G = np.zeros((n, 4, 3, _NDOF))
    G[..., :3] = np.eye(3)
    G[..., 3:6] = -_skew(r)
    for k in range(4):
        G[:, k, :, 6 + 3 * k : 9 + 3 * k] = jac_world[:, k]
    return G


def step(
    model: RobotModel,
    state: RobotState,
    env: WallEnvironment,
    act: ActuationConfig,
    joint_targets: np.ndarray,
    adhesion_forces: np.ndarray,
    dt: float,
    contact: ContactConfig | None = None,
) -> RobotState:
    """
    Advance all instances by one semi-implicit Euler step.

    Normal contact is a penalty spring-damper that never pulls. The magnetic pull in ``adhesion_forces`` acts as
    the tension side of that spring, up to its magnitude, so an attached pad resists being peeled off without
    being driven into the surface. Its tangential part is the magnetic shear hold; any remaining tangential
    demand is carried by Coulomb friction and the anchor slips when both are saturated. Damping of the normal
    contact is integrated implicitly, everything else explicitly.

    Parameters
    ----------
    model
        Robot geometry and inertia.
    state
        Current state, not modified.
    env
        Wall, per-instance gravity and friction.
    act
        Per-instance PD gains.
    joint_targets
        Joint position targets, ``(n, 12)``.
    adhesion_forces
        Holding force per foot, ``(n, 4, 3)``, as produced by :func:`magclimb._adhesion.holding_force`.
    dt
        Step size in ``(0, 0.01]`` s.
    contact
        Contact parameters.

    Returns
    -------
    The next state.

    Raises
    ------
    NonFiniteState
        If any instance becomes non-finite. The exception carries the offending instances and the new state.
    """
    contact = contact or ContactConfig()
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"Expected `dt` in (0, 0.01], found `{dt}`.")
    n = state.n
    adhesion_forces = np.asarray(adhesion_forces, dtype=np.float64).reshape(n, 4, 3)
    if not np.isfinite(adhesion_forces).all():
        raise ValueError("Adhesion forces must be finite.")
    joint_targets = np.asarray(joint_targets, dtype=np.float64).reshape(n, 12)
    normal = env.normal

    rot = state.rotation.as_matrix()
    r = np.einsum("nij,nkj->nki", rot, state.foot_pos_base)
    jac_world = np.einsum("nij,nkjl->nkil", rot, leg_jacobians(model, state.q))
    G = _foot_jacobians(r, jac_world)
    inertia = np.einsum("nij,j,nkj->nik", rot, model.base_inertia, rot)

    M = np.zeros((n, _NDOF, _NDOF))
    M[:, :3, :3] = model.body_mass * np.eye(3)
    M[:, 3:6, 3:6] = inertia
    M += model.foot_mass * np.einsum("nkia,nkib->nab", G, G)
    M[:, 6:, 6:] += model.joint_armature * np.eye(12)

    omega = state.base_ang_vel
    u = np.concatenate([state.base_lin_vel, omega, state.qd], axis=1)
    tau = joint_torques(model, act, state.q, state.qd, joint_targets)
    joint_vel_world = np.einsum("nkij,nkj->nki", jac_world, state.qd.reshape(n, 4, 3))
    foot_bias = np.cross(omega[:, None], np.cross(omega[:, None], r)) + 2.0 * np.cross(omega[:, None], joint_vel_world)

    Q = np.zeros((n, _NDOF))
    Q[:, :3] = model.body_mass * env.gravity
    Q[:, 3:6] = -np.cross(omega, np.einsum("nij,nj->ni", inertia, omega))
    Q[:, 6:] = tau
    Q += np.einsum("nkia,nki->na", G, model.foot_mass * (env.gravity[:, None, :] - foot_bias))

    # normal pass: implicit damping on an active set, forces bounded below by the magnetic pull
    Gn = np.einsum("nkia,i->nka", G, normal)
    penetration = -env.height(state.foot_pos)
    pull = np.maximum(-(adhesion_forces @ normal), 0.0)
    lower = -pull
    eligible = (penetration > 0.0) | (pull > 0.0)
    implicit = eligible.copy()
    Mu = np.einsum("nab,nb->na", M, u)
    spring = contact.stiffness * penetration
    force = np.zeros((n, 4))
    for _ in range(_ACTIVE_SET_ITERATIONS):
        clamped = eligible & ~implicit
        A = M + dt * contact.damping * np.einsum("nk,nka,nkb->nab", implicit, Gn, Gn)
        fixed = np.where(implicit, spring, np.where(clamped, lower, 0.0))
        b = Mu + dt * (Q + np.einsum("nk,nka->na", fixed, Gn))
        u_normal = np.linalg.solve(A, b[..., None])[..., 0]
        force = spring - contact.damping * np.einsum("nka,na->nk", Gn, u_normal)
        violated = implicit & (force < lower)
        if not violated.any():
            break
        implicit &= ~violated
    normal_total = np.where(eligible, np.maximum(np.where(implicit, force, lower), lower), 0.0)
    contact_normal = np.maximum(normal_total, 0.0)
    pull_used = np.maximum(-normal_total, 0.0)
    engaged = (contact_normal > 0.0) | (pull_used > 0.0)

    # tangential pass: magnetic hold first, friction carries the rest
    demand = np.where(engaged[..., None], tangential_demand(state, env, contact), 0.0)
    adhesion_tangential = adhesion_forces - (adhesion_forces @ normal)[..., None] * normal
    hold = np.where(engaged[..., None], adhesion_tangential, 0.0)
    friction = friction_force(demand - hold, contact_normal, env.friction[:, None])
    supplied = hold + friction
    foot_forces = normal_total[..., None] * normal + supplied
    b = Mu + dt * (Q + np.einsum("nkia,nki->na", G, foot_forces))
    u_next = np.linalg.solve(M, b[..., None])[..., 0]

    need = np.linalg.norm(demand, axis=-1)
    have = np.linalg.norm(supplied, axis=-1)
    slipping = engaged & (need > have + 1e-12)
    ratio = np.where(slipping, have / np.maximum(need, 1e-300), 1.0)
    anchors = state.foot_pos - (state.foot_pos - state.anchors) * ratio[..., None]

    new = state.copy()
    new.base_lin_vel = u_next[:, :3]
    new.base_ang_vel = u_next[:, 3:6]
    qd_next = u_next[:, 6:]
    new.base_pos = state.base_pos + dt * new.base_lin_vel
    quat = (Rotation.from_rotvec(dt * new.base_ang_vel) * state.rotation).as_quat()
    new.base_quat = quat / np.linalg.norm(quat, axis=1, keepdims=True)
    q_next = state.q + dt * qd_next
    at_lower = (q_next <= model.joint_lower) & (qd_next < 0)
    at_upper = (q_next >= model.joint_upper) & (qd_next > 0)
    qd_next = np.where(at_lower | at_upper, 0.0, qd_next)
    new.q = model.clamp(q_next)
    new.qdd = (qd_next - state.qd) / dt
    new.qd = qd_next
    new.tau = tau
    seating = contact_normal + np.where(engaged, pull, 0.0)
    new.ankle_rpy, new.ankle_rate = _ankle_step(model, state, act, seating, normal, dt)
    new.normal_force = contact_normal
    new.adhesion_pull = pull_used
    new.contact_force = contact_normal[..., None] * normal + friction
    new.time = state.time + dt
    new.refresh_kinematics(model, contact.penetration_tol)
    new.anchors = np.where(engaged[..., None], anchors, new.foot_pos)

    bad = nonfinite_rows(new.base_pos, new.base_quat, new.base_lin_vel, new.base_ang_vel, new.q, new.qd,
                         new.ankle_rpy, new.foot_pos)  # fmt: skip
    if len(bad):
        raise NonFiniteState(bad, new)
    return new


def _ankle_step(
    model: RobotModel,
    state: RobotState,
    act: ActuationConfig,
    seating_force: np.ndarray,
    wall_normal: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Compliant ball-joint ankle: elastic pull to the nominal orientation plus a seating torque while loaded.

    The seating torque rotates the pad flat against the wall with stiffness ``seating_force * pad radius``, the
    contact force plus the magnetic pull of an engaged pad.
    World rotation errors are mapped to roll-pitch-yaw rates through the calf frame (small-angle mapping).
    """
    _, rotvec = alignment_error(state.foot_normals, wall_normal)
    calf_world = np.einsum("nij,nkjl->nkil", state.rotation.as_matrix(), calf_rotations(state.q))
    error = np.einsum("nkji,nkj->nki", calf_world, rotvec)
    k_align = (seating_force * model.pad_radius)[..., None]
    kp = act.ankle_kp[:, None, None]
    kd = act.ankle_kd[:, None, None]
    torque = kp * (model.nominal_ankle_rpy - state.ankle_rpy) + k_align * error
    inertia = model.foot_inertia
    rate = (inertia * state.ankle_rate + dt * torque) / (inertia + dt * kd + dt * dt * (kp + k_align))
    return state.ankle_rpy + dt * rate, rate


class ActionDelayBuffer:
    """
    Bounded history of joint targets on the simulation clock.

    One sample is pushed per physics step. Queries interpolate linearly between the two samples around the
    requested time and saturate at the oldest and newest samples.
    """

    def __init__(self, n: int, dim: int = 12, max_delay: float = 0.008, dt: float = 0.002):
        if max_delay < 0 or dt <= 0:
            raise ValueError(f"Invalid buffer geometry `max_delay={max_delay}`, `dt={dt}`.")
        self.n, self.dim = n, dim
        maxlen = int(np.ceil(max_delay / dt)) + 2
        self._times: deque[float] = deque(maxlen=maxlen)
        self._values: deque[np.ndarray] = deque(maxlen=maxlen)

    def __len__(self) -> int:
        return len(self._times)

    @property
    def capacity(self) -> int:
        return self._times.maxlen or 0

    def push(self, now: float, targets: np.ndarray) -> None:
        if self._times and now < self._times[-1]:
            raise ValueError(f"Buffer time must be non-decreasing, got `{now}` after `{self._times[-1]}`.")
        self._times.append(float(now))
        self._values.append(np.array(targets, dtype=np.float64).reshape(self.n, self.dim))

    def reset(self, ids: np.ndarray | Sequence[int], targets: np.ndarray) -> None:
        """Overwrite the whole history of instances ``ids`` with ``targets``."""
        for values in self._values:
            values[ids] = targets

    def query(self, times: np.ndarray | float) -> np.ndarray:
        if not self._times:
            raise ValueError("Cannot query an empty action buffer.")
        stamps = np.fromiter(self._times, dtype=np.float64, count=len(self._times))
        values = np.stack(self._values)
        tq = np.clip(np.broadcast_to(np.asarray(times, dtype=np.float64), (self.n,)), stamps[0], stamps[-1])
        lo = np.clip(np.searchsorted(stamps, tq, side="right") - 1, 0, len(stamps) - 1)
        hi = np.minimum(lo + 1, len(stamps) - 1)
        span = stamps[hi] - stamps[lo]
        w = np.where(span > 0, (tq - stamps[lo]) / np.where(span > 0, span, 1.0), 0.0)[:, None]
        rows = np.arange(self.n)
        return (1.0 - w) * values[lo, rows] + w * values[hi, rows]


def apply_action_delay(
    buffer: ActionDelayBuffer, new_targets: np.ndarray, delay: np.ndarray | float, now: float
) -> np.ndarray:
    """
    Record ``new_targets`` at ``now`` and return the targets that were issued ``delay`` seconds earlier.

    Parameters
    ----------
    buffer
        History of issued targets.
    new_targets
        Targets issued at ``now``, ``(n, dim)``.
    delay
        Per-instance delay in ``[0, 0.008]`` s.
    now
        Simulation time.

    Returns
    -------
    The effective targets, ``(n, dim)``.
    """
    delay = np.asarray(delay, dtype=np.float64)
    if np.any(delay < 0) or np.any(delay > 0.008 + 1e-12):
        raise ValueError(f"Action delay must lie in [0, 0.008] s, found `{delay}`.")
    buffer.push(now, new_targets)
    if not np.any(delay):
        return np.array(buffer._values[-1])
    return buffer.query(now - delay)
