from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.spatial.transform import Rotation

from magclimb._config import ActuationRanges, ContactConfig, RobotConfig, WallConfig

__all__ = ["ActuationConfig", "RobotModel", "RobotState", "SurfacePatch", "WallEnvironment"]

# +1 for left legs, -1 for right legs, legs ordered RR, FR, RL, FL
_SIDE = np.array([-1.0, -1.0, 1.0, 1.0])
_FORE_AFT = np.array([-1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True, eq=False)
class RobotModel:
    """
    Reduced-order quadruped: rigid floating base, massless 3-DOF legs with point-mass feet.

    Joint vectors are ordered per leg (hip abduction, thigh, calf) with legs in ``RR, FR, RL, FL`` order.
    """

    body_mass: float = 8.0
    foot_mass: float = 0.2
    base_inertia: np.ndarray = field(default_factory=lambda: np.array([0.02, 0.1, 0.11]))
    link_lengths: np.ndarray = field(default_factory=lambda: np.array([0.08, 0.21, 0.21]))
    hip_offsets: np.ndarray = field(default_factory=lambda: _hip_offsets(0.19, 0.07))
    joint_lower: np.ndarray = field(default_factory=lambda: -np.tile([0.8, 1.6, 2.4], 4))
    joint_upper: np.ndarray = field(default_factory=lambda: np.tile([0.8, 1.6, 2.4], 4))
    nominal_joint_config: np.ndarray = field(default_factory=lambda: np.tile([0.0, 0.8, -1.323599], 4))
    nominal_ankle_rpy: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.523599, 0.0]))
    actuation_limits: np.ndarray = field(default_factory=lambda: np.full(12, 25.0))
    joint_armature: float = 0.03
    foot_inertia: float = 2e-4
    pad_radius: float = 0.015

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                object.__setattr__(self, f.name, np.asarray(value, dtype=np.float64))
        if min(self.body_mass, self.foot_mass) <= 0:
            raise ValueError(f"Masses must be positive, found `{self.body_mass}` and `{self.foot_mass}`.")
        if np.any(self.joint_lower >= self.joint_upper):
            raise ValueError("Joint limits must satisfy `lower < upper` elementwise.")
        q = self.nominal_joint_config
        if np.any(q < self.joint_lower) or np.any(q > self.joint_upper):
            raise ValueError("Nominal joint configuration lies outside the joint limits.")
        if np.any(self.actuation_limits <= 0) or np.any(self.base_inertia <= 0):
            raise ValueError("Actuation limits and base inertia must be positive.")

    @classmethod
    def from_config(cls, cfg: RobotConfig | None = None) -> RobotModel:
        cfg = cfg or RobotConfig()
        limits = np.tile(cfg.joint_limits, 4)
        return cls(
            body_mass=cfg.body_mass,
            foot_mass=cfg.foot_mass,
            base_inertia=np.array(cfg.base_inertia),
            link_lengths=np.array(cfg.link_lengths),
            hip_offsets=_hip_offsets(*cfg.hip_offset),
            joint_lower=-limits,
            joint_upper=limits,
            nominal_joint_config=np.tile(cfg.nominal_joint, 4),
            nominal_ankle_rpy=np.array(cfg.nominal_ankle_rpy),
            actuation_limits=np.full(12, cfg.actuation_limit),
            joint_armature=cfg.joint_armature,
            foot_inertia=cfg.foot_inertia,
            pad_radius=cfg.pad_radius,
        )

    @property
    def side(self) -> np.ndarray:
        return _SIDE

    @property
    def total_mass(self) -> float:
        return self.body_mass + 4 * self.foot_mass

    @property
    def rest_height(self) -> float:
        """Base height above the surface that puts all feet on it in the nominal configuration."""
        from magclimb._kinematics import leg_positions

        feet = leg_positions(self, self.nominal_joint_config[None])[0]
        return float(-feet[:, 2].mean())

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lower, self.joint_upper)


def _hip_offsets(dx: float, dy: float) -> np.ndarray:
    return np.stack([_FORE_AFT * dx, _SIDE * dy, np.zeros(4)], axis=1)


@dataclass(eq=False)
class RobotState:
    """
    Batched robot state of ``n`` independent instances.

    Orientation quaternions are scalar-last ``(x, y, z, w)``, as used by :class:`scipy.spatial.transform.Rotation`.
    Angular velocity is expressed in the world frame. Foot quantities are ``(n, 4, 3)`` in ``RR, FR, RL, FL`` order.
    """

    base_pos: np.ndarray
    base_quat: np.ndarray
    base_lin_vel: np.ndarray
    base_ang_vel: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    ankle_rpy: np.ndarray
    ankle_rate: np.ndarray
    foot_pos: np.ndarray
    foot_pos_base: np.ndarray
    foot_vel: np.ndarray
    foot_normals: np.ndarray
    contact: np.ndarray
    normal_force: np.ndarray
    contact_force: np.ndarray
    adhesion_pull: np.ndarray
    anchors: np.ndarray
    time: np.ndarray

    @property
    def n(self) -> int:
        return len(self.base_pos)

    @classmethod
    def nominal(
        cls,
        model: RobotModel,
        n: int = 1,
        base_pos: np.ndarray | Sequence[float] | None = None,
        base_quat: np.ndarray | Sequence[float] | None = None,
    ) -> RobotState:
        """Robot at rest in the nominal configuration, by default standing on the surface."""
        pos = np.zeros((n, 3))
        pos[:, 2] = model.rest_height
        if base_pos is not None:
            pos[:] = base_pos
        quat = np.zeros((n, 4))
        quat[:, 3] = 1.0
        if base_quat is not None:
            quat[:] = base_quat
        zeros3, zeros12, zeros43 = np.zeros((n, 3)), np.zeros((n, 12)), np.zeros((n, 4, 3))
        state = cls(
            base_pos=pos,
            base_quat=quat,
            base_lin_vel=zeros3.copy(),
            base_ang_vel=zeros3.copy(),
            q=np.tile(model.nominal_joint_config, (n, 1)),
            qd=zeros12.copy(),
            qdd=zeros12.copy(),
            tau=zeros12.copy(),
            ankle_rpy=np.tile(model.nominal_ankle_rpy, (n, 4, 1)),
            ankle_rate=zeros43.copy(),
            foot_pos=zeros43.copy(),
            foot_pos_base=zeros43.copy(),
            foot_vel=zeros43.copy(),
            foot_normals=zeros43.copy(),
            contact=np.zeros((n, 4), dtype=bool),
            normal_force=np.zeros((n, 4)),
            contact_force=zeros43.copy(),
            adhesion_pull=np.zeros((n, 4)),
            anchors=zeros43.copy(),
            time=np.zeros(n),
        )
        state.refresh_kinematics(model)
        state.anchors[:] = state.foot_pos
        return state

    def refresh_kinematics(self, model: RobotModel, penetration_tol: float = ContactConfig.penetration_tol) -> None:
        """Recompute foot positions, velocities, face normals and contact flags from the generalized state."""
        from magclimb._kinematics import forward_kinematics, leg_jacobians

        self.q = model.clamp(self.q)
        kin = forward_kinematics(model, self.base_pos, self.base_quat, self.q, self.ankle_rpy)
        self.foot_pos, self.foot_normals, self.foot_pos_base = kin.positions, kin.normals, kin.positions_base
        rot = self.rotation.as_matrix()
        r = np.einsum("nij,nkj->nki", rot, self.foot_pos_base)
        jac = np.einsum("nij,nkjl->nkil", rot, leg_jacobians(model, self.q))
        qd = self.qd.reshape(-1, 4, 3)
        self.foot_vel = (
            self.base_lin_vel[:, None, :]
            + np.cross(self.base_ang_vel[:, None, :], r)
            + np.einsum("nkij,nkj->nki", jac, qd)
        )
        # a pad held in tension by its magnet stays seated on the wall
        self.contact = (-self.foot_pos[..., 2] >= -penetration_tol) | (self.adhesion_pull > 0.0)

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.base_quat)

    @property
    def lin_vel_base(self) -> np.ndarray:
        return self.rotation.apply(self.base_lin_vel, inverse=True)

    @property
    def ang_vel_base(self) -> np.ndarray:
        return self.rotation.apply(self.base_ang_vel, inverse=True)

    @property
    def body_z(self) -> np.ndarray:
        return self.rotation.as_matrix()[:, :, 2]

    def projected_gravity(self, gravity: np.ndarray) -> np.ndarray:
        """Unit gravity direction in the base frame."""
        g = np.broadcast_to(gravity, self.base_pos.shape)
        return self.rotation.apply(g / np.linalg.norm(g, axis=-1, keepdims=True), inverse=True)

    def copy(self) -> RobotState:
        return RobotState(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def subset(self, ids: np.ndarray | Sequence[int]) -> RobotState:
        return RobotState(**{f.name: getattr(self, f.name)[ids].copy() for f in fields(self)})

    def assign(self, ids: np.ndarray | Sequence[int], other: RobotState) -> None:
        """Overwrite the instances ``ids`` with the instances of ``other``."""
        for f in fields(self):
            getattr(self, f.name)[ids] = getattr(other, f.name)

    def is_finite(self) -> np.ndarray:
        ok = np.ones(self.n, dtype=bool)
        for f in fields(self):
            value = getattr(self, f.name)
            if value.dtype.kind == "f":
                ok &= np.isfinite(value.reshape(self.n, -1)).all(axis=1)
        return ok


@dataclass(frozen=True)
class SurfacePatch:
    """Axis-aligned rectangle on the wall plane."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    ferromagnetic: bool = True

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError(f"Patch `{self}` must have a positive area.")

    def contains(self, xy: np.ndarray) -> np.ndarray:
        x, y = xy[..., 0], xy[..., 1]
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    @property
    def corners(self) -> np.ndarray:
        return np.array(
            [[self.x_min, self.y_min, 0.0], [self.x_max, self.y_min, 0.0], [self.x_min, self.y_max, 0.0],
             [self.x_max, self.y_max, 0.0]]  # fmt: skip
        )


@dataclass(eq=False)
class WallEnvironment:
    """
    The climbing surface is the plane ``z = 0`` with unit normal ``+z``; gravity rotates instead of the wall.

    Patches are evaluated in order and the last one containing a point decides whether it is ferromagnetic.
    Points outside every patch are not ferromagnetic.
    """

    gravity: np.ndarray
    friction: np.ndarray
    patches: list[SurfacePatch] = field(default_factory=lambda: [SurfacePatch(-6.0, 6.0, -3.0, 3.0)])
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    point: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.gravity = np.atleast_2d(np.asarray(self.gravity, dtype=np.float64)).copy()
        self.friction = np.atleast_1d(np.asarray(self.friction, dtype=np.float64)).copy()
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            raise ValueError(f"Wall normal must be a unit vector, found `{self.normal}`.")
        if not self.patches:
            raise ValueError("At least one surface patch is required.")

    @classmethod
    def from_config(
        cls, cfg: WallConfig | None = None, n: int = 1, friction: float = 0.4, gravity: Sequence[float] | None = None
    ) -> WallEnvironment:
        cfg = cfg or WallConfig()
        patches = [SurfacePatch(*cfg.extent)]
        patches.extend(SurfacePatch(*p, ferromagnetic=False) for p in cfg.patches())
        g = np.array([0.0, 0.0, -9.81]) if gravity is None else np.asarray(gravity, dtype=np.float64)
        return cls(gravity=np.tile(g, (n, 1)), friction=np.full(n, friction), patches=patches)

    @property
    def n(self) -> int:
        return len(self.friction)

    def sample_friction(
        self, ids: np.ndarray | Sequence[int], rngs: Sequence[np.random.Generator], cfg: ContactConfig
    ) -> None:
        lo, hi = cfg.friction_range
        for i in ids:
            self.friction[i] = rngs[i].uniform(lo, hi)

    def height(self, points: np.ndarray) -> np.ndarray:
        """Signed distance of ``points`` from the wall plane, positive on the robot side."""
        return (points - self.point) @ self.normal

    def on_ferromagnetic(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(points.shape[:-1], dtype=bool)
        for patch in self.patches:
            inside = patch.contains(points)
            out = np.where(inside, patch.ferromagnetic, out)
        return out

    def bottom_edge_height(self) -> np.ndarray:
        """Lowest patch corner along the up direction ``-g``, per instance."""
        corners = np.concatenate([p.corners for p in self.patches])
        up = -self.gravity / np.linalg.norm(self.gravity, axis=1, keepdims=True)
        return (up @ corners.T).min(axis=1)


@dataclass(eq=False)
class ActuationConfig:
    """Per-instance actuation parameters; joint gains are scale factors of a base gain pair."""

    joint_kp: np.ndarray
    joint_kd: np.ndarray
    ankle_kp: np.ndarray
    ankle_kd: np.ndarray
    action_delay: np.ndarray
    base_kp: float = 100.0
    base_kd: float = 2.0

    def __post_init__(self) -> None:
        for name in ("joint_kp", "joint_kd", "ankle_kp", "ankle_kd", "action_delay"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64)).copy())
        if np.any(self.joint_kp <= 0) or np.any(self.joint_kd <= 0):
            raise ValueError("Joint gains must be positive.")
        if np.any(self.ankle_kp <= 0) or np.any(self.ankle_kd <= 0):
            raise ValueError("Ankle gains must be positive.")
        if np.any(self.action_delay < 0) or np.any(self.action_delay > 0.008 + 1e-12):
            raise ValueError(f"Action delay must lie in [0, 0.008] s, found `{self.action_delay}`.")

    @classmethod
    def nominal(cls, n: int = 1, ranges: ActuationRanges | None = None) -> ActuationConfig:
        """Range midpoints and zero delay."""
        r = ranges or ActuationRanges()
        mid = lambda rng: np.full(n, 0.5 * (rng[0] + rng[1]))  # noqa: E731
        return cls(
            joint_kp=mid(r.kp_range),
            joint_kd=mid(r.kd_range),
            ankle_kp=mid(r.ankle_kp_range),
            ankle_kd=mid(r.ankle_kd_range),
            action_delay=np.zeros(n),
            base_kp=r.base_kp,
            base_kd=r.base_kd,
        )

    def sample(
        self, ids: np.ndarray | Sequence[int], rngs: Sequence[np.random.Generator], ranges: ActuationRanges
    ) -> None:
        """Draw new gains and delays for the instances ``ids``, each from its own generator."""
        for i in ids:
            rng = rngs[i]
            self.joint_kp[i] = rng.uniform(*ranges.kp_range)
            self.joint_kd[i] = rng.uniform(*ranges.kd_range)
            self.ankle_kp[i] = rng.uniform(*ranges.ankle_kp_range)
            self.ankle_kd[i] = rng.uniform(*ranges.ankle_kd_range)
            self.action_delay[i] = rng.uniform(*ranges.delay_range)

    @property
    def kp(self) -> np.ndarray:
        """Effective joint stiffness in N m / rad."""
        return self.base_kp * self.joint_kp

    @property
    def kd(self) -> np.ndarray:
        """Effective joint damping in N m s / rad."""
        return self.base_kd * self.joint_kd

