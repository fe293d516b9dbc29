from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from loguru import logger

from magclimb._config import AdhesionConfig
from magclimb._dynamics import clip_norm
from magclimb.constants._constants import GateReason

__all__ = [
    "AdhesionModel",
    "AdhesionStep",
    "AttachDecision",
    "EpmFoot",
    "GateInputs",
    "airgap_decay_rate",
    "airgap_force",
    "gate_adhesion",
    "gate_codes",
    "holding_force",
    "switch_epm",
]

_OK = GateReason.OK.code
_NO_CONTACT_CONF = GateReason.NO_CONTACT_CONF.code
_MAGNET_OFF = GateReason.MAGNET_OFF.code
_STOCHASTIC_FAIL = GateReason.STOCHASTIC_FAIL.code
_MISALIGNED = GateReason.MISALIGNED.code
_NON_FERROMAGNETIC = GateReason.NON_FERROMAGNETIC.code


@dataclass(frozen=True)
class EpmFoot:
    """
    Switching state of one electropermanent magnet.

    A pending switch to ``pending_on`` takes effect at ``switch_pending_until``; ``None`` means nothing is pending.
    """

    epm_on: bool = False
    switch_pending_until: float | None = None
    pending_on: bool = False
    max_force: float = 697.0
    attached: bool = False
    attach_gap: float = 0.0

    def __post_init__(self) -> None:
        if self.max_force <= 0:
            raise ValueError(f"Expected `max_force` to be positive, found `{self.max_force}`.")
        if self.attached and not self.epm_on:
            raise ValueError("A foot cannot be attached while its magnet is off.")

    @property
    def pending(self) -> bool:
        return self.switch_pending_until is not None

    def resolve(self, now: float) -> EpmFoot:
        """Apply a pending switch whose latency has elapsed at ``now``."""
        if self.switch_pending_until is None or now < self.switch_pending_until:
            return self
        on = self.pending_on
        return replace(self, epm_on=on, switch_pending_until=None, attached=self.attached and on)


@dataclass(frozen=True)
class GateInputs:
    contact_confidence: float
    magnet_action: float
    alignment_gap: float
    on_ferromagnetic: bool
    prob_attach: float
    rng_draw: float

    def __post_init__(self) -> None:
        for name in ("contact_confidence", "prob_attach", "rng_draw"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Expected `{name}` in [0, 1], found `{value}`.")
        if self.alignment_gap < 0:
            raise ValueError(f"Expected a non-negative `alignment_gap`, found `{self.alignment_gap}`.")


@dataclass(frozen=True)
class AttachDecision:
    attach: bool
    reason: GateReason
    sampled: bool = False

    def __post_init__(self) -> None:
        if self.attach != (self.reason is GateReason.OK):
            raise ValueError(f"Inconsistent decision: attach={self.attach}, reason={self.reason}.")


def gate_codes(
    contact_confidence: np.ndarray,
    magnet_action: np.ndarray,
    rng_draw: np.ndarray,
    prob_attach: np.ndarray,
    alignment_gap: np.ndarray,
    on_ferromagnetic: np.ndarray,
    *,
    gap_tol: float = 5e-4,
    contact_threshold: float = 0.5,
    magnet_threshold: float = 0.5,
    modeling: bool = True,
) -> np.ndarray:
    """
    Vectorised adhesion gate.

    Returns the integer code of the first failing condition, or of :attr:`GateReason.OK`.
    With ``modeling=False`` the alignment condition is skipped.
    """
    aligned = np.asarray(alignment_gap) <= gap_tol
    if not modeling:
        aligned = np.ones_like(aligned, dtype=bool)
    return np.select(
        [
            np.asarray(contact_confidence) < contact_threshold,
            np.asarray(magnet_action) < magnet_threshold,
            np.asarray(rng_draw) > np.asarray(prob_attach),
            ~aligned,
            ~np.asarray(on_ferromagnetic, dtype=bool),
        ],
        [_NO_CONTACT_CONF, _MAGNET_OFF, _STOCHASTIC_FAIL, _MISALIGNED, _NON_FERROMAGNETIC],
        default=_OK,
    )


def gate_adhesion(
    g: GateInputs,
    foot_in_swing_prev: bool = False,
    *,
    gap_tol: float = 5e-4,
    contact_threshold: float = 0.5,
    magnet_threshold: float = 0.5,
    modeling: bool = True,
) -> AttachDecision:
    """
    Decide whether a foot attaches.

    Conditions are checked in order: contact confidence, magnet command, stochastic success ``X <= p`` and
    finally full alignment on a ferromagnetic surface. The first failing one is reported.

    Parameters
    ----------
    g
        Gate inputs. ``g.rng_draw`` is the draw latched for the current stance.
    foot_in_swing_prev
        Whether the foot was in swing before this step. A swing to contact transition is where the caller
        samples a new draw; it is reported back through :attr:`AttachDecision.sampled`.
    gap_tol
        Largest air gap in m considered fully aligned.
    contact_threshold
        Contact confidence threshold.
    magnet_threshold
        Magnet command threshold.
    modeling
        When ``False`` any magnet command on contact is treated as fully aligned.

    Returns
    -------
    The attach decision and its reason.
    """
    code = int(
        gate_codes(
            g.contact_confidence,
            g.magnet_action,
            g.rng_draw,
            g.prob_attach,
            g.alignment_gap,
            g.on_ferromagnetic,
            gap_tol=gap_tol,
            contact_threshold=contact_threshold,
            magnet_threshold=magnet_threshold,
            modeling=modeling,
        )
    )
    reason = GateReason.from_code(code)
    sampled = foot_in_swing_prev and g.contact_confidence >= contact_threshold
    return AttachDecision(attach=reason is GateReason.OK, reason=reason, sampled=sampled)


def airgap_decay_rate(reference_gap: float = 1e-3, ratio_at_reference: float = 0.07) -> float:
    """Exponential decay rate in 1/m such that the force drops to ``ratio_at_reference`` at ``reference_gap``."""
    return float(np.log(1.0 / ratio_at_reference) / reference_gap)


def airgap_force(
    gap: np.ndarray | float,
    max_force: float = 697.0,
    reference_gap: float = 1e-3,
    ratio_at_reference: float = 0.07,
) -> np.ndarray | float:
    """
    Normal holding force available at an air gap.

    Parameters
    ----------
    gap
        Air gap in m, non-negative.
    max_force
        Force at zero gap in N.
    reference_gap
        Gap in m at which the force is ``ratio_at_reference * max_force``.
    ratio_at_reference
        Remaining force fraction at ``reference_gap``.

    Returns
    -------
    Force in N, scalar if ``gap`` is a scalar.
    """
    arr = np.asarray(gap, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError(f"Air gap must be non-negative, found `{gap}`.")
    force = max_force * np.exp(-airgap_decay_rate(reference_gap, ratio_at_reference) * arr)
    return float(force) if np.ndim(gap) == 0 else force


def switch_epm(foot: EpmFoot, command_on: bool, now: float, latency: float = 0.005) -> EpmFoot:
    """
    Issue a switch command.

    A command that differs from the magnet state starts a switch taking effect ``latency`` s later; a command
    back to the current state cancels a pending switch, a repeated command keeps it. Switching off releases
    the foot once the switch takes effect.
    """
    if latency < 0:
        raise ValueError(f"Switch latency must be non-negative, found `{latency}`.")
    foot = foot.resolve(now)
    command_on = bool(command_on)
    if command_on == foot.epm_on:
        return replace(foot, switch_pending_until=None)
    if foot.pending and foot.pending_on == command_on:
        return foot
    return replace(foot, switch_pending_until=now + latency, pending_on=command_on).resolve(now)


def holding_force(
    foot: EpmFoot,
    decision: AttachDecision,
    gap: float,
    wall_normal: np.ndarray | Sequence[float],
    tangential_load: np.ndarray | Sequence[float] | None = None,
    *,
    config: AdhesionConfig | None = None,
    modeling: bool = True,
    on_ferromagnetic: bool = True,
) -> np.ndarray:
    """
    Force a magnet can exert on its foot.

    The normal component pulls toward the wall with the air-gap limited force, or with the full force when
    alignment is not modelled. A misaligned pad on steel still pulls with the reduced force. The tangential
    component holds up to ``mu_mag`` times the pull against ``tangential_load``, the shear the foot needs.

    Returns
    -------
    Force vector in N.
    """
    cfg = config or AdhesionConfig()
    normal = np.asarray(wall_normal, dtype=np.float64)
    zero = np.zeros(3)
    if not foot.epm_on:
        return zero
    if decision.attach:
        pull = _airgap(cfg, foot.max_force, gap) if modeling else foot.max_force
    elif modeling and cfg.partial_contact and decision.reason is GateReason.MISALIGNED and on_ferromagnetic:
        pull = _airgap(cfg, foot.max_force, gap)
    else:
        return zero
    force = -pull * normal
    if tangential_load is not None:
        load = np.asarray(tangential_load, dtype=np.float64)
        load = load - (load @ normal) * normal
        force = force + clip_norm(load, cfg.mu_mag * pull)
    return force


def _airgap(cfg: AdhesionConfig, max_force: float | np.ndarray, gap: float | np.ndarray):
    return max_force * np.exp(-airgap_decay_rate(cfg.reference_gap, cfg.ratio_at_reference) * np.maximum(gap, 0.0))


@dataclass
class AdhesionStep:
    """Per-foot adhesion outcome of one physics step, arrays of shape ``(n, 4)``."""

    codes: np.ndarray
    attached: np.ndarray
    sampled: np.ndarray
    epm_on: np.ndarray
    command_on: np.ndarray
    pull: np.ndarray

    @property
    def stochastic_fail(self) -> np.ndarray:
        return self.codes == _STOCHASTIC_FAIL


class AdhesionModel:
    """
    Magnets of ``n`` robots with four feet each.

    The stochastic draw is latched when the contact confidence crosses the threshold and kept for the whole
    stance; the episode start counts as such a crossing. Every instance draws from its own generator.

    Parameters
    ----------
    n
        Number of instances.
    rngs
        One generator per instance.
    config
        Adhesion parameters.
    modeling
        Whether alignment and air gap are modelled.
    """

    def __init__(
        self,
        n: int,
        rngs: Sequence[np.random.Generator],
        config: AdhesionConfig | None = None,
        modeling: bool = True,
    ):
        if len(rngs) != n:
            raise ValueError(f"Expected `{n}` generators, found `{len(rngs)}`.")
        self.n = n
        self.rngs = list(rngs)
        self.config = config or AdhesionConfig()
        self.modeling = modeling
        self.enabled = np.ones(n, dtype=bool)
        self.prob_attach = np.ones(n)
        self.epm_on = np.zeros((n, 4), dtype=bool)
        self.pending_until = np.full((n, 4), np.nan)
        self.pending_on = np.zeros((n, 4), dtype=bool)
        self.attached = np.zeros((n, 4), dtype=bool)
        self.attach_gap = np.zeros((n, 4))
        self.draws = np.zeros((n, 4))
        self.in_stance = np.zeros((n, 4), dtype=bool)
        self.below_time = np.zeros((n, 4))

    def set_enabled(self, ids: np.ndarray | Sequence[int], enabled: bool) -> None:
        """Switch the adhesion model on or off for the instances ``ids``; disabled magnets never pull."""
        self.enabled[np.asarray(ids, dtype=int)] = enabled

    def set_prob_attach(self, ids: np.ndarray | Sequence[int], prob: float) -> None:
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"Attachment probability must lie in [0, 1], found `{prob}`.")
        self.prob_attach[np.asarray(ids, dtype=int)] = prob

    def reset(self, ids: np.ndarray | Sequence[int]) -> None:
        """Magnets on, nothing pending, a fresh draw latched for the first stance."""
        ids = np.asarray(ids, dtype=int)
        self.epm_on[ids] = True
        self.pending_until[ids] = np.nan
        self.pending_on[ids] = False
        self.attached[ids] = False
        self.attach_gap[ids] = 0.0
        self.in_stance[ids] = True
        self.below_time[ids] = 0.0
        for i in ids:
            self.draws[i] = self.rngs[i].uniform(size=4)

    def foot(self, env_id: int, leg: int) -> EpmFoot:
        """Scalar view of one magnet."""
        until = self.pending_until[env_id, leg]
        return EpmFoot(
            epm_on=bool(self.epm_on[env_id, leg]),
            switch_pending_until=None if np.isnan(until) else float(until),
            pending_on=bool(self.pending_on[env_id, leg]),
            max_force=self.config.max_force,
            attached=bool(self.attached[env_id, leg]),
            attach_gap=float(self.attach_gap[env_id, leg]),
        )

    def _switch(self, command_on: np.ndarray, now: float) -> None:
        due = ~np.isnan(self.pending_until) & (now >= self.pending_until)
        self.epm_on = np.where(due, self.pending_on, self.epm_on)
        self.pending_until[due] = np.nan
        pending = ~np.isnan(self.pending_until)
        cancel = command_on == self.epm_on
        start = ~cancel & ~(pending & (self.pending_on == command_on))
        self.pending_until[cancel] = np.nan
        self.pending_until[start] = now + self.config.switch_latency
        self.pending_on[start] = command_on[start]
        if self.config.switch_latency == 0:
            self.epm_on = np.where(start, command_on, self.epm_on)
            self.pending_until[start] = np.nan

    def update(
        self,
        magnet_action: np.ndarray,
        contact_confidence: np.ndarray,
        alignment_gap: np.ndarray,
        on_ferromagnetic: np.ndarray,
        now: float,
        dt: float,
    ) -> AdhesionStep:
        """
        Advance magnets and gate by one physics step of ``dt`` ending at ``now``.

        Parameters
        ----------
        magnet_action
            Policy magnet channel, ``(n, 4)``.
        contact_confidence
            Estimated contact confidence, ``(n, 4)``.
        alignment_gap
            Air gap per foot in m, ``(n, 4)``.
        on_ferromagnetic
            Whether each foot is above a ferromagnetic patch, ``(n, 4)``.
        now
            Simulation time at the end of the step.
        dt
            Step size.

        Returns
        -------
        The gate outcome per foot.
        """
        cfg = self.config
        conf = np.clip(contact_confidence, 0.0, 1.0)
        stance = conf >= cfg.contact_threshold
        touchdown = stance & ~self.in_stance
        for i in np.flatnonzero(touchdown.any(axis=1)):
            legs = np.flatnonzero(touchdown[i])
            self.draws[i, legs] = self.rngs[i].uniform(size=len(legs))
        self.in_stance = stance
        self.below_time = np.where(stance, 0.0, self.below_time + dt)

        # hardware rule: the magnet stays on until contact has been lost for longer than the debounce time
        if cfg.debounce_time > 0:
            command_on = self.below_time <= cfg.debounce_time
            gate_conf = np.where(command_on, 1.0, conf)
        else:
            command_on = np.asarray(magnet_action) >= cfg.magnet_threshold
            gate_conf = conf
        self._switch(command_on, now)

        codes = gate_codes(
            gate_conf,
            command_on.astype(np.float64),
            self.draws,
            self.prob_attach[:, None],
            alignment_gap,
            on_ferromagnetic,
            gap_tol=cfg.gap_tol,
            contact_threshold=cfg.contact_threshold,
            magnet_threshold=0.5,
            modeling=self.modeling,
        )
        codes = np.where((codes == _OK) & ~self.epm_on, _MAGNET_OFF, codes)
        attached = (codes == _OK) & self.enabled[:, None]
        newly = attached & ~self.attached
        self.attach_gap = np.where(newly, alignment_gap, self.attach_gap)
        self.attached = attached
        pull = self.pull(codes, alignment_gap, on_ferromagnetic)
        if newly.any():
            logger.trace(f"{int(newly.sum())} feet attached at t={now:.3f}")
        return AdhesionStep(
            codes=codes,
            attached=attached,
            sampled=touchdown,
            epm_on=self.epm_on.copy(),
            command_on=command_on,
            pull=pull,
        )

    def pull(self, codes: np.ndarray, alignment_gap: np.ndarray, on_ferromagnetic: np.ndarray) -> np.ndarray:
        """Available normal pull per foot in N."""
        cfg = self.config
        gap_force = _airgap(cfg, cfg.max_force, alignment_gap)
        full = gap_force if self.modeling else np.full(codes.shape, cfg.max_force)
        pull = np.where(codes == _OK, full, 0.0)
        if self.modeling and cfg.partial_contact:
            partial = (codes == _MISALIGNED) & np.asarray(on_ferromagnetic, dtype=bool) & self.epm_on
            pull = np.where(partial, gap_force, pull)
        return np.where(self.epm_on & self.enabled[:, None], pull, 0.0)

    def forces(self, step: AdhesionStep, wall_normal: np.ndarray, tangential_load: np.ndarray) -> np.ndarray:
        """Holding forces ``(n, 4, 3)``: the normal pull plus the shear hold against ``tangential_load``."""
        normal = np.asarray(wall_normal, dtype=np.float64)
        load = tangential_load - (tangential_load @ normal)[..., None] * normal
        hold = clip_norm(load, self.config.mu_mag * step.pull)
        return -step.pull[..., None] * normal + hold
