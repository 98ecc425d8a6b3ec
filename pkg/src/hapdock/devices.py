"""Device models: grounded 6-DOF force-feedback arm and hand exoskeleton glove.

The arm runs an admittance loop (position/speed targets at 1 kHz); the glove
runs local contact-drum loops parameterised by normalized stop rotations and
spring constants. Both are modeled at the API level, not the motor level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .frames import RigidTransform, euler_xyz_from_quat, quat_from_euler_xyz, slerp
from .geometry import Box, Vec3

# Scheduler rate contract: the coordinator ticks at 1 kHz; the glove must not
# be commanded faster than 30 Hz while the arm must be re-targeted at least
# that often.
CONTROL_TICK_S = 0.001
DEVICE_PERIOD_LIMIT_S = 1.0 / 30.0
GLOVE_PERIOD_TICKS = 34  # 34 ms >= 33.3 ms minimum spacing

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")
NUM_FINGERS = 5
PHALANGES_PER_FINGER = 3


@dataclass(frozen=True, slots=True)
class ArmSpec:
    """Static description of a grounded arm: reach, limits and control gains."""

    name: str
    workspace_extents: Vec3          # m, axis-aligned box in the base frame
    rot_range_deg: Vec3              # total angular range about each base axis
    max_force: Vec3                  # N per axis
    max_torque: Vec3                 # Nm per axis
    stiffness: float                 # N/m of the admittance control loop
    base_pose: RigidTransform = RigidTransform.identity()
    workspace_center: Vec3 = (0.0, 0.0, 0.0)  # box center, base frame
    max_speed: float = 1.5           # m/s hardware cap
    max_angular_speed: float = 6.0   # rad/s hardware cap
    track_tau_s: float = 0.010       # first-order tracking time constant

    def __post_init__(self):
        for label, vals in (("workspace_extents", self.workspace_extents),
                            ("rot_range_deg", self.rot_range_deg),
                            ("max_force", self.max_force),
                            ("max_torque", self.max_torque)):
            if any(v <= 0.0 for v in vals):
                raise ValueError(f"{self.name}: {label} must be strictly positive")
        if self.stiffness <= 0.0 or self.max_speed <= 0.0 or self.track_tau_s <= 0.0:
            raise ValueError(f"{self.name}: stiffness, max_speed and track_tau_s must be positive")

    def workspace_box_base(self) -> Box:
        return Box.from_extents(self.workspace_center, self.workspace_extents)

    def workspace_box_world(self) -> Box:
        """World-frame workspace box; requires a translation-only base pose."""
        if self.base_pose.rotation_angle() > 1e-9:
            raise ValueError(f"{self.name}: world workspace box needs an axis-aligned base")
        return self.workspace_box_base().translate(self.base_pose.translation)


@dataclass(frozen=True, slots=True)
class GloveSpec:
    """Hand exoskeleton capabilities: actuated/sensed DOF counts and limits."""

    name: str = "glove"
    actuated_dofs: int = 5
    joint_range_deg: float = 165.0
    max_joint_torque: float = 0.5    # Nm per actuated DOF
    sensed_dofs: int = 11

    def __post_init__(self):
        if self.actuated_dofs > self.sensed_dofs:
            raise ValueError("glove cannot actuate more DOFs than it senses")
        if self.joint_range_deg <= 0.0 or self.max_joint_torque <= 0.0:
            raise ValueError("glove ranges and torque limits must be positive")


# Catalog rows for the two devices the default scenarios are built from.
VIRTUOSE_6D = ArmSpec(
    name="virtuose_6d",
    workspace_extents=(1.330, 0.575, 1.020),
    rot_range_deg=(330.0, 130.0, 270.0),
    max_force=(9.5, 9.5, 9.5),
    max_torque=(1.0, 1.0, 1.0),
    stiffness=1000.0,
)

DEXMO_GLOVE = GloveSpec(name="dexmo")

ARM_CATALOG = {"virtuose_6d": VIRTUOSE_6D}
GLOVE_CATALOG = {"dexmo": DEXMO_GLOVE}


@dataclass(frozen=True, slots=True)
class HandModelParams:
    """Forward-model constants mapping normalized flex to joint angles.

    The distal and middle joints follow the knuckle joint by fixed linear
    ratios; the ratios are calibration constants pinned by tests.
    """

    mcp_min_deg: float = 0.0
    mcp_max_deg: float = 75.0
    pip_ratio: float = 0.85
    dip_ratio: float = 0.55
    abd_min_deg: float = -12.0
    abd_max_deg: float = 12.0

    def joint_angles(self, flex: float) -> tuple[float, float, float]:
        mcp = math.radians(self.mcp_min_deg + (self.mcp_max_deg - self.mcp_min_deg) * flex)
        return (mcp, self.pip_ratio * mcp, self.dip_ratio * mcp)

    def abduction_angle(self, abd: float) -> float:
        return math.radians(self.abd_min_deg + (self.abd_max_deg - self.abd_min_deg) * abd)


DEFAULT_HAND_PARAMS = HandModelParams()


@dataclass(frozen=True, slots=True)
class HandCalibration:
    """Per-user sensor extremes recorded during the power-grasp calibration."""

    flex_min: tuple[float, ...] = (0.0,) * NUM_FINGERS
    flex_max: tuple[float, ...] = (1.0,) * NUM_FINGERS
    abd_min: tuple[float, ...] = (0.0,) * NUM_FINGERS
    abd_max: tuple[float, ...] = (1.0,) * NUM_FINGERS

    def __post_init__(self):
        for lo, hi in zip(self.flex_min + self.abd_min, self.flex_max + self.abd_max):
            if not lo < hi:
                raise ValueError("calibration minimum must be below maximum for every DOF")

    def normalize(self, raw: float, lo: float, hi: float) -> tuple[float, bool]:
        x = (raw - lo) / (hi - lo)
        if x < 0.0:
            return 0.0, True
        if x > 1.0:
            return 1.0, True
        return x, False


@dataclass(frozen=True, slots=True)
class HandState:
    """Kinematic hand state: wrist pose plus normalized finger parameters."""

    wrist_pose: RigidTransform
    flex: tuple[float, ...]
    abduction: tuple[float, ...]
    joint_angles: tuple[tuple[float, float, float], ...]  # (mcp, pip, dip) rad
    resist_torques: tuple[float, ...] = (0.0,) * NUM_FINGERS
    clamp_flags: tuple[bool, ...] = (False,) * (2 * NUM_FINGERS)


@dataclass(frozen=True, slots=True)
class GloveCommand:
    """Contact-drum parameters: normalized stop rotation + spring per finger."""

    stop_angle: tuple[float, ...] = (1.0,) * NUM_FINGERS
    spring_constant: tuple[float, ...] = (0.0,) * NUM_FINGERS

    def __post_init__(self):
        if any(not 0.0 <= s <= 1.0 for s in self.stop_angle):
            raise ValueError("stop_angle components must lie in [0, 1]")
        if any(k < 0.0 for k in self.spring_constant):
            raise ValueError("spring constants must be nonnegative")


@dataclass(frozen=True, slots=True)
class ArmCommand:
    """Admittance target for the effector pivot, expressed in the base frame."""

    target: RigidTransform
    speed_limit: float               # m/s
    angular_speed_limit: float = 3.0  # rad/s

    def __post_init__(self):
        if self.speed_limit <= 0.0 or self.angular_speed_limit <= 0.0:
            raise ValueError("command speed limits must be positive")


@dataclass(frozen=True, slots=True)
class ArmState:
    """Effector pose (world frame) plus bookkeeping from the last step."""

    pose: RigidTransform
    clamped: bool = False


def hand_forward_model(sensed, calibration: HandCalibration,
                       wrist_pose: RigidTransform,
                       params: HandModelParams = DEFAULT_HAND_PARAMS) -> HandState:
    """Map the raw sensor vector to a full hand pose.

    Sensor layout is five flex channels, five spread channels and one spare
    wrist channel that the simplified model ignores. Values outside the
    calibrated range are clamped and flagged.
    """
    if len(sensed) != 11:
        raise ValueError(f"expected 11 sensed values, got {len(sensed)}")
    flex, abd, flags = [], [], []
    for i in range(NUM_FINGERS):
        f, c = calibration.normalize(float(sensed[i]),
                                     calibration.flex_min[i], calibration.flex_max[i])
        flex.append(f)
        flags.append(c)
    for i in range(NUM_FINGERS):
        a, c = calibration.normalize(float(sensed[NUM_FINGERS + i]),
                                     calibration.abd_min[i], calibration.abd_max[i])
        abd.append(a)
        flags.append(c)
    angles = tuple(params.joint_angles(f) for f in flex)
    return HandState(wrist_pose=wrist_pose, flex=tuple(flex), abduction=tuple(abd),
                     joint_angles=angles, clamp_flags=tuple(flags))


def glove_apply(cmd: GloveCommand, hand: HandState,
                spec: GloveSpec = DEXMO_GLOVE,
                params: HandModelParams = DEFAULT_HAND_PARAMS) -> HandState:
    """Apply contact-drum stops: flex never exceeds the stop rotation.

    When the user pushes past a stop the glove resists with torque
    ``spring * (intended - stop)``, clamped to the per-DOF torque limit.
    """
    new_flex, torques = [], []
    for f, stop, spring in zip(hand.flex, cmd.stop_angle, cmd.spring_constant):
        clamped = min(f, stop)
        new_flex.append(clamped)
        excess = f - stop
        torque = spring * excess if excess > 0.0 else 0.0
        torques.append(min(torque, spec.max_joint_torque))
    angles = tuple(params.joint_angles(f) for f in new_flex)
    return replace(hand, flex=tuple(new_flex), joint_angles=angles,
                   resist_torques=tuple(torques))


def arm_step(spec: ArmSpec, state: ArmState, cmd: ArmCommand, dt: float) -> ArmState:
    """Advance the effector one control tick toward the commanded target.

    The inner loop is a first-order tracker with a hard speed clamp: error
    decays monotonically and the effector arrives exactly once the remaining
    distance fits in one tick. Targets outside the workspace are projected
    onto the box and the clamp is reported on the returned state.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    box = spec.workspace_box_base()
    target_pos = cmd.target.translation
    clamped_pos = box.clamp_point(target_pos)
    clamped = clamped_pos != tuple(target_pos)

    half_range = tuple(math.radians(r) * 0.5 for r in spec.rot_range_deg)
    rx, ry, rz = euler_xyz_from_quat(cmd.target.rotation)
    crx = max(-half_range[0], min(half_range[0], rx))
    cry = max(-half_range[1], min(half_range[1], ry))
    crz = max(-half_range[2], min(half_range[2], rz))
    if (crx, cry, crz) != (rx, ry, rz):
        clamped = True
    target_rot = quat_from_euler_xyz(crx, cry, crz)

    target_world = spec.base_pose.compose(RigidTransform(target_rot, clamped_pos))

    cur = state.pose
    dx = tuple(t - c for t, c in zip(target_world.translation, cur.translation))
    dist = math.sqrt(dx[0] ** 2 + dx[1] ** 2 + dx[2] ** 2)
    speed = min(cmd.speed_limit, spec.max_speed, dist / spec.track_tau_s)
    step = speed * dt
    if step >= dist or dist < 1e-15:
        new_pos = target_world.translation
    else:
        s = step / dist
        new_pos = tuple(c + s * d for c, d in zip(cur.translation, dx))

    angle = cur.rotation_angle_to(target_world)
    if angle < 1e-12:
        new_rot = target_world.rotation
    else:
        omega = min(cmd.angular_speed_limit, spec.max_angular_speed,
                    angle / spec.track_tau_s)
        frac = min(1.0, omega * dt / angle)
        new_rot = slerp(cur.rotation, target_world.rotation, frac)

    # Safety net: the effector itself must never leave the reachable box.
    base_inv = spec.base_pose.inverse()
    local = base_inv.compose(RigidTransform(new_rot, new_pos))
    safe_local_pos = box.clamp_point(local.translation)
    pose = spec.base_pose.compose(RigidTransform(local.rotation, safe_local_pos))
    return ArmState(pose=pose, clamped=clamped)


def impedance_displacement(force_cmd, stiffness: float) -> Vec3:
    """Spring-law offset that makes the admittance loop render ``force_cmd``."""
    if stiffness <= 0.0:
        raise ValueError("stiffness must be strictly positive")
    fx, fy, fz = (float(c) for c in force_cmd)
    return (fx / stiffness, fy / stiffness, fz / stiffness)


@dataclass(frozen=True, slots=True)
class HandGeometry:
    """Collider layout of the simplified hand: one palm sphere plus five
    three-phalange finger chains.

    The thumb chain opposes the finger chains (it curls the other way from a
    mirrored base), which is what lets the model pinch. Distances are meters
    in the wrist frame: +X distal, +Y toward the finger side, +Z lateral.
    """

    palm_center: Vec3 = (0.05, 0.0, 0.0)
    palm_radius: float = 0.05
    finger_base_x: float = 0.09
    finger_base_y: float = 0.030
    finger_z: tuple[float, ...] = (0.027, 0.027, 0.009, -0.009, -0.027)
    curl_sign: tuple[float, ...] = (1.0, -1.0, -1.0, -1.0, -1.0)
    phalange_lengths: tuple[float, ...] = (0.042, 0.026, 0.020)
    phalange_radius: float = 0.009

    def finger_base(self, finger: int) -> Vec3:
        y = self.finger_base_y if self.curl_sign[finger] < 0.0 else -self.finger_base_y
        return (self.finger_base_x, y, self.finger_z[finger])


DEFAULT_HAND_GEOMETRY = HandGeometry()


def finger_sphere_centers(geom: HandGeometry, wrist: RigidTransform, finger: int,
                          joint_angles: tuple[float, float, float],
                          abd_angle: float) -> list[Vec3]:
    """Wrist-frame chain evaluated to world-space phalange sphere centers."""
    mcp, pip, dip = joint_angles
    cum = (mcp, mcp + pip, mcp + pip + dip)
    ca, sa = math.cos(abd_angle), math.sin(abd_angle)
    curl = geom.curl_sign[finger]
    px, py, pz = geom.finger_base(finger)
    centers = []
    for length, theta in zip(geom.phalange_lengths, cum):
        dx = math.cos(theta)
        dy = curl * math.sin(theta)
        px += length * (dx * ca)
        py += length * dy
        pz += length * (-dx * sa)
        centers.append(wrist.transform_point((px, py, pz)))
    return centers


def hand_collider_spheres(state: HandState,
                          geom: HandGeometry = DEFAULT_HAND_GEOMETRY,
                          params: HandModelParams = DEFAULT_HAND_PARAMS
                          ) -> list[tuple[str, Vec3, float]]:
    """All hand collider spheres (name, world center, radius) for one state."""
    out = [("palm", state.wrist_pose.transform_point(geom.palm_center), geom.palm_radius)]
    for k, name in enumerate(FINGER_NAMES):
        abd = params.abduction_angle(state.abduction[k])
        centers = finger_sphere_centers(geom, state.wrist_pose, k,
                                        state.joint_angles[k], abd)
        for j, c in enumerate(centers):
            out.append((f"{name}_{j}", c, geom.phalange_radius))
    return out
