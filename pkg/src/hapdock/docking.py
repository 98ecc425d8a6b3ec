"""Temporary kinematic joints between devices: joint taxonomy, magnetic
attach/release behaviour, the interception controller and the dock lifecycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .devices import ArmCommand
from .frames import RigidTransform, correction_chain
from .geometry import Vec3

DOF_LABELS = ("tx", "ty", "tz", "rx", "ry", "rz")

# Defaults for the magnet-on-plate dock: 12 V electromagnet, 5 kg peak hold,
# 25 mm face diameter, steel plate.
DEFAULT_BREAKING_FORCE_N = 5.0 * 9.81
DEFAULT_CONTACT_RADIUS_M = 0.0125
DEFAULT_FRICTION_MU = 0.4
DEFAULT_POS_TOL_M = 0.005
DEFAULT_ANG_TOL_RAD = math.radians(5.0)


@dataclass(frozen=True, slots=True)
class DockJointKind:
    """How a dock constrains relative motion.

    Each kind fixes a 6-bit constrained-DOF mask (tx ty tz rx ry rz in the
    plate frame, +Z along the plate normal). ``friction_limited`` DOFs carry
    load only up to the friction capacity of the magnet preload and slip
    beyond it; ``free`` DOFs transmit nothing.
    """

    name: str
    constrained: frozenset
    friction_limited: frozenset = frozenset()

    def __post_init__(self):
        bad = (self.constrained | self.friction_limited) - set(DOF_LABELS)
        if bad:
            raise ValueError(f"unknown DOF labels: {sorted(bad)}")
        if self.constrained & self.friction_limited:
            raise ValueError("a DOF cannot be both constrained and friction-limited")

    @property
    def free(self) -> frozenset:
        return frozenset(DOF_LABELS) - self.constrained - self.friction_limited

    def constrained_mask(self) -> tuple[bool, ...]:
        return tuple(label in self.constrained for label in DOF_LABELS)

    def degraded_dofs(self) -> tuple[str, ...]:
        """DOFs the hybrid device cannot rely on through this joint."""
        return tuple(l for l in DOF_LABELS if l in (self.free | self.friction_limited))


# Magnet slips and turns on the plate under low preload.
PLATE_SLIP = DockJointKind("plate_slip",
                           constrained=frozenset({"tz", "rx", "ry"}),
                           friction_limited=frozenset({"tx", "ty", "rz"}))
# Stronger preload: no in-plane slip, rotation about the normal still resisted
# only by friction.
PLATE_FRICTION = DockJointKind("plate_friction",
                               constrained=frozenset({"tx", "ty", "tz", "rx", "ry"}),
                               friction_limited=frozenset({"rz"}))
# Magnet seats in a holder: precise axis, turns freely about the normal.
PINNED_ROTARY = DockJointKind("pinned_rotary",
                              constrained=frozenset({"tx", "ty", "tz", "rx", "ry"}))
# Teeth on holder and surface make the pair effectively rigid.
TOOTHED = DockJointKind("toothed", constrained=frozenset(DOF_LABELS))
# Plate rides a slider: one in-plane translation stays free.
PRISMATIC = DockJointKind("prismatic",
                          constrained=frozenset({"ty", "tz", "rx", "ry", "rz"}))


def free_axes(constrained: set[str] | frozenset) -> DockJointKind:
    """Custom joint kind from an explicit constrained-DOF set."""
    return DockJointKind("free_axes", constrained=frozenset(constrained))


JOINT_KIND_CATALOG = {k.name: k for k in
                      (PLATE_SLIP, PLATE_FRICTION, PINNED_ROTARY, TOOTHED, PRISMATIC)}


@dataclass(frozen=True, slots=True)
class DockJoint:
    """A formed dock: joint kind plus the measured relative attach transform."""

    kind: DockJointKind
    breaking_force: float = DEFAULT_BREAKING_FORCE_N
    friction_mu: float = DEFAULT_FRICTION_MU
    contact_radius: float = DEFAULT_CONTACT_RADIUS_M
    attach_pose: RigidTransform = RigidTransform.identity()  # plate -> magnet

    def __post_init__(self):
        if self.breaking_force <= 0.0:
            raise ValueError("breaking_force must be strictly positive")
        if self.friction_mu < 0.0 or self.contact_radius <= 0.0:
            raise ValueError("friction_mu must be >= 0 and contact_radius > 0")

    @property
    def peel_torque(self) -> float:
        # Lever-arm model: peeling happens about the face edge at half the
        # contact radius under the full holding force.
        return self.breaking_force * self.contact_radius * 0.5


class DockState(Enum):
    FREE = "free"
    INTERCEPTING = "intercepting"
    DOCKED = "docked"
    RELEASING = "releasing"


LEGAL_TRANSITIONS = frozenset({
    (DockState.FREE, DockState.INTERCEPTING),
    (DockState.INTERCEPTING, DockState.DOCKED),
    (DockState.INTERCEPTING, DockState.FREE),
    (DockState.DOCKED, DockState.RELEASING),
    (DockState.RELEASING, DockState.FREE),
})


class IllegalDockTransition(RuntimeError):
    """A dock lifecycle transition outside the legal graph was requested."""


def require_transition(old: DockState, new: DockState) -> None:
    if old is new:
        return
    if (old, new) not in LEGAL_TRANSITIONS:
        raise IllegalDockTransition(f"{old.value} -> {new.value} is not a legal dock transition")


def pursue(effector_pose: RigidTransform, target_pose: RigidTransform,
           max_speed: float, dt: float, *,
           base_pose: RigidTransform = RigidTransform.identity(),
           tool_offset: RigidTransform = RigidTransform.identity(),
           angular_speed: float = 3.0) -> ArmCommand:
    """Pure-pursuit command: chase the target's current pose directly.

    The command is expressed for the effector pivot in the arm base frame; the
    tool offset is folded in through the frame-correction chain so the *tool*
    face lands on the target. Orientation is commanded to the fixed pose that
    mates the tool with the target, not blended.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if max_speed <= 0.0:
        raise ValueError("max_speed must be positive")
    effect_fwd = base_pose.inverse().compose(effector_pose)
    tool_w = effector_pose.compose(tool_offset)
    chain = correction_chain(base_pose, effector_pose, tool_w, target_pose, effect_fwd)
    return ArmCommand(target=chain.effect_forward_new, speed_limit=max_speed,
                      angular_speed_limit=angular_speed)


def try_attach(magnet_pose: RigidTransform, plate_pose: RigidTransform,
               pos_tol: float, ang_tol: float, kind: DockJointKind, *,
               breaking_force: float = DEFAULT_BREAKING_FORCE_N,
               friction_mu: float = DEFAULT_FRICTION_MU,
               contact_radius: float = DEFAULT_CONTACT_RADIUS_M) -> DockJoint | None:
    """Form a joint if the energized magnet face is on the plate.

    Docking is opportunistic: the joint records whatever relative transform
    the faces actually met at, so the kinematic chain stays exact without a
    pose snap. Returns None when the faces are too far apart or misaligned.
    """
    gap = magnet_pose.translation_distance_to(plate_pose)
    if gap > pos_tol:
        return None
    mz = magnet_pose.rotate_vector((0.0, 0.0, 1.0))
    pz = plate_pose.rotate_vector((0.0, 0.0, 1.0))
    dot = max(-1.0, min(1.0, mz[0] * pz[0] + mz[1] * pz[1] + mz[2] * pz[2]))
    if math.acos(dot) > ang_tol:
        return None
    attach = plate_pose.inverse().compose(magnet_pose)
    return DockJoint(kind=kind, breaking_force=breaking_force,
                     friction_mu=friction_mu, contact_radius=contact_radius,
                     attach_pose=attach)


def joint_transmit(joint: DockJoint, wrench) -> tuple[np.ndarray, bool, bool]:
    """Pass a plate-frame wrench through the joint.

    Returns (transmitted, slip, released). Free DOFs transmit zero;
    friction-limited DOFs are truncated to the preload capacity with
    ``slip=True``; tensile axial load beyond the breaking force or off-axis
    peel torque beyond the peel threshold releases the joint, transmitting
    nothing. Axial tension is the +tz component (pulling the magnet off the
    plate along its normal).
    """
    w = np.asarray(wrench, dtype=float)
    if w.shape != (6,):
        raise ValueError("wrench must be a 6-vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("wrench must be finite")

    tension = w[2]
    if tension > joint.breaking_force:
        return np.zeros(6), False, True
    peel = math.hypot(w[3], w[4])
    if peel > joint.peel_torque:
        return np.zeros(6), False, True

    out = w.copy()
    for i, label in enumerate(DOF_LABELS):
        if label in joint.kind.free:
            out[i] = 0.0

    slip = False
    preload = joint.breaking_force + max(0.0, -tension)
    fl = joint.kind.friction_limited
    tang_axes = [i for i in (0, 1) if DOF_LABELS[i] in fl]
    if tang_axes:
        tang = math.sqrt(sum(out[i] ** 2 for i in tang_axes))
        cap = joint.friction_mu * preload
        if tang > cap:
            scale = cap / tang
            for i in tang_axes:
                out[i] *= scale
            slip = True
    if "rz" in fl:
        cap = joint.friction_mu * preload * joint.contact_radius
        if abs(out[5]) > cap:
            out[5] = math.copysign(cap, out[5])
            slip = True
    return out, slip, False


@dataclass(frozen=True, slots=True)
class DockContext:
    """Per-tick inputs the lifecycle transition function decides on."""

    intercept_wanted: bool       # predicted hand position inside the inflated reach
    arbitration_winner: bool     # this arm won the nearest-effector tie-break
    magnet_energized: bool
    attach_candidate: bool       # faces within attach tolerance
    slot_available: bool         # no other joint currently formed
    release_demanded: bool       # over-force, peel, workspace exit or software
    magnet_off_settled: bool     # de-energize latency elapsed


def dock_step(state: DockState, ctx: DockContext) -> tuple[DockState, tuple[str, ...]]:
    """One lifecycle tick. Returns the new state and the emitted events."""
    if state is DockState.FREE:
        if ctx.intercept_wanted and ctx.arbitration_winner:
            new = DockState.INTERCEPTING
            require_transition(state, new)
            return new, ("intercept",)
        return state, ()
    if state is DockState.INTERCEPTING:
        if not ctx.intercept_wanted:
            require_transition(state, DockState.FREE)
            return DockState.FREE, ("abort",)
        if ctx.magnet_energized and ctx.attach_candidate and ctx.slot_available:
            require_transition(state, DockState.DOCKED)
            return DockState.DOCKED, ("attach",)
        return state, ()
    if state is DockState.DOCKED:
        if ctx.release_demanded:
            require_transition(state, DockState.RELEASING)
            return DockState.RELEASING, ("release",)
        return state, ()
    if state is DockState.RELEASING:
        if ctx.magnet_off_settled:
            require_transition(state, DockState.FREE)
            return DockState.FREE, ("demagnetized",)
        return state, ()
    raise IllegalDockTransition(f"unknown dock state {state!r}")


def predict_position(position: Vec3, velocity, horizon_s: float) -> Vec3:
    """Constant-velocity extrapolation used to anticipate interception."""
    return tuple(p + float(v) * horizon_s for p, v in zip(position, velocity))


@dataclass(slots=True)
class MagnetChannel:
    """Boolean magnet power channel with actuation latency.

    Stands in for the serial link to the magnet's microcontroller: a command
    only becomes effective ``latency_s`` after it is issued.
    """

    latency_s: float = 0.010
    commanded: bool = False
    effective: bool = False
    _switch_time: float | None = None

    def command(self, on: bool, now: float) -> None:
        if on != self.commanded:
            self.commanded = on
            self._switch_time = now + self.latency_s

    def update(self, now: float) -> bool:
        if self._switch_time is not None and now >= self._switch_time:
            self.effective = self.commanded
            self._switch_time = None
        return self.effective
