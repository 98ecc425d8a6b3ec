"""Split observed contact impulses into glove and arm feedback.

Forces between opposing hand colliders (a squeeze) cancel and belong to the
glove's local loops; whatever net world-referenced force remains cannot be
driven by palm-fixed actuators and is routed to the docked arm. The glove
stop values themselves come from the de-penetration (contact-drum) search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .devices import (DEFAULT_HAND_GEOMETRY, DEFAULT_HAND_PARAMS, GloveCommand,
                      HandGeometry, HandModelParams, HandState,
                      finger_sphere_centers)
from .frames import RigidTransform
from .sim import ContactImpulse, World, sphere_box_signed_depth

PAIRING_ANGLE_DEG = 15.0  # opposing-force pairing cone, isolated for replacement


@dataclass(frozen=True, slots=True)
class RoutedForces:
    """Outcome of one routing pass over a step's impulses."""

    arm_wrench: np.ndarray          # 6-vector in the arm base frame (zeros if undocked)
    glove_stops: GloveCommand
    residual: np.ndarray            # unroutable 6-vector, world frame (logged)
    net_force: np.ndarray           # world frame, total over hand colliders
    net_torque: np.ndarray          # world frame, about the reference point
    paired_magnitude: float         # |force| attributed to canceling squeeze pairs
    hand_contact_count: int


def _hand_forces(impulses: list[ContactImpulse], dt: float):
    """Per-collider reaction forces on the hand, grouped with their source body."""
    out = []
    for imp in impulses:
        if imp.hand_collider is None:
            continue
        scale = imp.magnitude / dt
        force = np.array([-scale * imp.normal[0],
                          -scale * imp.normal[1],
                          -scale * imp.normal[2]])
        out.append((imp.hand_collider, imp.body_b, force, imp.point))
    return out


def _paired_magnitude(forces, angle_deg: float) -> float:
    """Greedy opposing-pair detection: forces on hand colliders against the
    same body whose lines of action oppose within the cone pair off; the
    common magnitude counts as glove-internal squeeze."""
    cos_limit = math.cos(math.radians(angle_deg))
    used = [False] * len(forces)
    paired = 0.0
    for i in range(len(forces)):
        if used[i]:
            continue
        _, body_i, fi, _ = forces[i]
        ni = float(np.linalg.norm(fi))
        if ni < 1e-12:
            continue
        for j in range(i + 1, len(forces)):
            if used[j]:
                continue
            _, body_j, fj, _ = forces[j]
            if body_j != body_i:
                continue
            nj = float(np.linalg.norm(fj))
            if nj < 1e-12:
                continue
            if float(fi @ fj) / (ni * nj) <= -cos_limit:
                paired += min(ni, nj)
                used[i] = used[j] = True
                break
    return paired


def route_forces(impulses: list[ContactImpulse], hand: HandState,
                 stops: GloveCommand, docked: bool, dt: float, *,
                 arm_base: RigidTransform | None = None,
                 reference_point=None,
                 pairing_angle_deg: float = PAIRING_ANGLE_DEG) -> RoutedForces:
    """Route one step's hand-contact impulses.

    The vector sum over all hand colliders is the net world-referenced force;
    when docked it is expressed in the arm base frame and returned as the arm
    wrench (torque taken about ``reference_point``, normally the attachment
    plate). When not docked it is logged as residual and discarded.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    forces = _hand_forces(impulses, dt)
    if reference_point is None:
        reference_point = hand.wrist_pose.translation
    ref = np.asarray(reference_point, dtype=float)

    net_force = np.zeros(3)
    net_torque = np.zeros(3)
    rx, ry, rz = float(ref[0]), float(ref[1]), float(ref[2])
    for _, _, f, p in forces:
        net_force += f
        ax, ay, az = p[0] - rx, p[1] - ry, p[2] - rz
        net_torque[0] += ay * f[2] - az * f[1]
        net_torque[1] += az * f[0] - ax * f[2]
        net_torque[2] += ax * f[1] - ay * f[0]

    paired = _paired_magnitude(forces, pairing_angle_deg)

    arm_wrench = np.zeros(6)
    residual = np.zeros(6)
    if docked and arm_base is not None:
        rot_inv = arm_base.inverse()
        arm_wrench[:3] = rot_inv.rotate_vector(tuple(net_force))
        arm_wrench[3:] = rot_inv.rotate_vector(tuple(net_torque))
    else:
        residual[:3] = net_force
        residual[3:] = net_torque

    return RoutedForces(arm_wrench=arm_wrench, glove_stops=stops,
                        residual=residual, net_force=net_force,
                        net_torque=net_torque, paired_magnitude=paired,
                        hand_contact_count=len(forces))


def _finger_penetration(world: World, geom: HandGeometry, params: HandModelParams,
                        wrist: RigidTransform, finger: int, abd_angle: float,
                        flex: float) -> float:
    """Worst signed depth of the finger's phalange spheres at a given flex.

    Positive means penetrating, negative means clear; zero is exact touch.
    """
    centers = finger_sphere_centers(geom, wrist, finger,
                                    params.joint_angles(flex), abd_angle)
    worst = -math.inf
    for body in world.bodies:
        if not body.collide_with_hand or body.shape != "box":
            continue
        for c in centers:
            depth = sphere_box_signed_depth(c, geom.phalange_radius,
                                            body.position, body.half_extents)
            if depth > worst:
                worst = depth
    return worst


def contact_drum_param(hand: HandState, finger: int, world: World, *,
                       geom: HandGeometry = DEFAULT_HAND_GEOMETRY,
                       params: HandModelParams = DEFAULT_HAND_PARAMS,
                       search_tol: float = 1e-4) -> float:
    """Normalized stop rotation that would just resolve the finger's penetration.

    Evaluates the hypothetical de-penetration pose by moving the phalanges
    (not the world) back along the flex interpolant and bisecting for the
    first-contact flex. Returns 1.0 (unrestricted) when nothing touches and
    the current flex when the finger is exactly at the surface.
    """
    flex_now = hand.flex[finger]
    abd_angle = params.abduction_angle(hand.abduction[finger])
    pen_now = _finger_penetration(world, geom, params, hand.wrist_pose,
                                  finger, abd_angle, flex_now)
    if pen_now < 0.0:
        return 1.0
    if pen_now == 0.0:
        return flex_now
    if _finger_penetration(world, geom, params, hand.wrist_pose,
                           finger, abd_angle, 0.0) > 0.0:
        return 0.0
    lo, hi = 0.0, flex_now
    while hi - lo > search_tol:
        mid = 0.5 * (lo + hi)
        if _finger_penetration(world, geom, params, hand.wrist_pose,
                               finger, abd_angle, mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


class LowPassFilter:
    """First-order low-pass on a fixed-rate vector signal."""

    def __init__(self, cutoff_hz: float, dt: float, size: int = 6):
        if cutoff_hz < 0.0:
            raise ValueError("cutoff must be nonnegative")
        self.enabled = cutoff_hz > 0.0
        self.alpha = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * dt) if self.enabled else 1.0
        self.state = np.zeros(size)

    def update(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.enabled:
            self.state = x.copy()
        else:
            self.state = self.state + self.alpha * (x - self.state)
        return self.state.copy()

    def reset(self) -> None:
        self.state = np.zeros_like(self.state)
