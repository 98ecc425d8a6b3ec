"""Scenario runner: fixed-rate coordinator, telemetry log and the weight oracle.

One coordinator tick is 1 ms. Every tick runs physics, force routing, the
dock lifecycle and the arm admittance callback; glove commands are issued at
their slower contracted rate. Everything is single-threaded and seeded, so a
scenario replays byte-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import Condition, ScenarioConfig
from .devices import (ArmCommand, ArmState, GloveCommand, HandState, arm_step,
                      glove_apply, hand_collider_spheres, hand_forward_model,
                      impedance_displacement)
from .docking import (DockContext, DockJoint, DockState, MagnetChannel,
                      dock_step, joint_transmit, predict_position, pursue,
                      try_attach)
from .frames import RigidTransform
from .routing import LowPassFilter, contact_drum_param, route_forces
from .sim import (BodyKind, HandCollider, RigidBody, SimulationDiverged,
                  SolverParams, World, step_world)


class MetricLog:
    """Append-only per-tick records plus one self-describing header."""

    def __init__(self, header: dict):
        self.header = header
        self.records: list[dict] = []

    def append(self, record: dict) -> None:
        self.records.append(record)

    def to_bytes(self) -> bytes:
        lines = [json.dumps(self.header, separators=(",", ":"))]
        lines.extend(json.dumps(r, separators=(",", ":")) for r in self.records)
        return ("\n".join(lines) + "\n").encode("utf-8")

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "MetricLog":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line]
        if not lines:
            raise ValueError(f"{path}: empty log")
        header = json.loads(lines[0])
        if header.get("record") != "header":
            raise ValueError(f"{path}: first record is not a header")
        log = cls(header)
        for line in lines[1:]:
            log.records.append(json.loads(line))
        return log


def _fl(values) -> list[float]:
    return [float(v) for v in values]


@dataclass(slots=True)
class _ArmUnit:
    index: int
    name: str
    cfg: object
    state: ArmState
    dock_state: DockState
    magnet: MagnetChannel
    joint: DockJoint | None = None
    clamped: bool = False
    cooldown_until: float = 0.0


class Coordinator:
    """Owns all mutable state and drives one scenario tick by tick."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.dt = cfg.coordinator.dt
        self.glove_period = cfg.coordinator.glove_period_ticks
        self.world = self._build_world()
        self.filter = LowPassFilter(cfg.coordinator.filter_cutoff_hz, self.dt, size=6)
        self.glove_cmd = GloveCommand(
            spring_constant=(cfg.glove.spring_constant,) * 5)
        self.units = [
            _ArmUnit(index=i, name=arm.name, cfg=arm,
                     state=ArmState(pose=RigidTransform.from_translation(arm.park_position)),
                     dock_state=DockState.FREE,
                     magnet=MagnetChannel(latency_s=cfg.dock.magnet_latency_s))
            for i, arm in enumerate(cfg.arms)
        ]
        self.rng = np.random.default_rng(cfg.seed)
        self.noise_std = cfg.tracking_noise_std_m
        self._prev_spheres: dict[str, np.ndarray] = {}
        self._prev_plate: np.ndarray | None = None
        self._last_glove_tick: int | None = None
        self.log = MetricLog(self._header())

    def _header(self) -> dict:
        c = self.cfg
        return {
            "record": "header",
            "schema": 1,
            "scenario": c.name,
            "seed": c.seed,
            "condition": c.condition.value,
            "tick_rate_hz": c.coordinator.tick_rate_hz,
            "ticks": c.coordinator.ticks,
            "arms": [a.name for a in c.arms],
            "bodies": [b.name for b in c.scene.bodies],
            "fields": {
                "t": "simulated time, s",
                "events": "glove_cmd / arm_target:<arm> / intercept:<arm> / "
                          "attach:<arm> / release:<arm> / abort:<arm> / demagnetized:<arm>",
                "wrist": "wrist position, world, m",
                "flex": "actual normalized finger flex after stops",
                "stops": "active contact-drum stop per finger",
                "resist": "glove resistance torque per finger, Nm",
                "sensor_clamps": "count of sensor channels clamped to the calibrated range",
                "cmd_wrench": "commanded arm wrench, world frame, N / Nm",
                "net_force": "net world-referenced hand-contact force, N",
                "support": "vertical hand->body force per dynamic body, N",
                "arms[].rendered": "wrench transmitted to the hand, world frame",
                "arms[].tool_dist": "magnet face to plate distance, m",
            },
        }

    def _build_world(self) -> World:
        scene = self.cfg.scene
        world = World(gravity=np.asarray(scene.gravity),
                      params=SolverParams(iterations=scene.solver_iterations,
                                          slop=scene.slop,
                                          surface_stiffness=scene.surface_stiffness))
        kind_map = {"dynamic": BodyKind.DYNAMIC, "kinematic": BodyKind.KINEMATIC,
                    "static": BodyKind.STATIC}
        for b in scene.bodies:
            velocity = np.zeros(6)
            velocity[:3] = b.velocity
            world.add_body(RigidBody(
                name=b.name, kind=kind_map[b.kind], shape=b.shape,
                position=np.asarray(b.center),
                half_extents=None if b.half_extents is None else np.asarray(b.half_extents),
                radius=b.radius, velocity=velocity, mass=b.mass,
                rotation_locked=b.rotation_locked,
                collide_with_hand=b.collide_with_hand))
        return world

    # -- per-tick pipeline -------------------------------------------------

    def run(self) -> MetricLog:
        for tick in range(self.cfg.coordinator.ticks):
            self._tick(tick)
        return self.log

    def _hand_for_tick(self, t: float, events: list[str], tick: int) -> HandState:
        cfg = self.cfg
        wrist_pos, flex_int, abd = cfg.trajectory.sample(t)
        wrist = RigidTransform.from_quat(cfg.trajectory.wrist_rotation, wrist_pos)
        cal = cfg.glove.calibration
        sensed = [cal.flex_min[i] + flex_int[i] * (cal.flex_max[i] - cal.flex_min[i])
                  for i in range(5)]
        sensed += [cal.abd_min[i] + abd[i] * (cal.abd_max[i] - cal.abd_min[i])
                   for i in range(5)]
        sensed.append(0.0)  # spare wrist channel, unused by the forward model
        intended = hand_forward_model(sensed, cal, wrist, cfg.glove.hand_params)

        if tick % self.glove_period == 0:
            if self._last_glove_tick is not None:
                assert tick - self._last_glove_tick >= self.glove_period, \
                    "glove command rate contract violated"
            self._last_glove_tick = tick
            stops = tuple(
                contact_drum_param(intended, k, self.world,
                                   geom=cfg.glove.geometry,
                                   params=cfg.glove.hand_params)
                for k in range(5))
            self.glove_cmd = GloveCommand(
                stop_angle=stops,
                spring_constant=(cfg.glove.spring_constant,) * 5)
            events.append("glove_cmd")
        return glove_apply(self.glove_cmd, intended, cfg.glove.spec,
                           cfg.glove.hand_params)

    def _update_hand_colliders(self, hand: HandState) -> None:
        spheres = hand_collider_spheres(hand, self.cfg.glove.geometry,
                                        self.cfg.glove.hand_params)
        colliders = []
        for name, center, radius in spheres:
            c = np.asarray(center)
            prev = self._prev_spheres.get(name)
            vel = np.zeros(3) if prev is None else (c - prev) / self.dt
            colliders.append(HandCollider(name=name, center=c, radius=radius,
                                          velocity=vel))
            self._prev_spheres[name] = c
        self.world.set_hand(colliders)

    def _tracked_plate(self, plate: RigidTransform) -> RigidTransform:
        if self.noise_std <= 0.0:
            return plate
        noise = self.rng.normal(0.0, self.noise_std, 3)
        t = tuple(p + n for p, n in zip(plate.translation, noise))
        return RigidTransform(plate.rotation, t)

    def _docked_unit(self) -> _ArmUnit | None:
        for u in self.units:
            if u.dock_state is DockState.DOCKED and u.joint is not None:
                return u
        return None

    def _dock_management(self, t: float, plate: RigidTransform,
                         plate_vel: np.ndarray, cmd_world: np.ndarray,
                         events: list[str]):
        """Run the lifecycle for every arm; returns per-arm transmitted wrench."""
        cfg = self.cfg
        dock = cfg.dock
        transmitted = {u.name: np.zeros(6) for u in self.units}
        slips = {u.name: False for u in self.units}
        if cfg.condition is Condition.FREE:
            return transmitted, slips

        predicted = predict_position(plate.translation, plate_vel,
                                     dock.interception_horizon_s)
        triggers = {}
        for u in self.units:
            box = u.cfg.spec.workspace_box_world().inflate(dock.workspace_inflation_m)
            triggers[u.name] = box.contains(predicted)

        # Nearest effector among free arms whose trigger fires wins the
        # interception; ties break toward the lowest arm index.
        winner = None
        best = None
        for u in self.units:
            if u.dock_state is not DockState.FREE or not triggers[u.name]:
                continue
            if t < u.cooldown_until:
                continue
            d = math.dist(u.state.pose.translation, predicted)
            if best is None or d < best - 1e-12:
                best, winner = d, u.index

        for u in self.units:
            release_demanded = False
            joint_candidate = None
            magnet_on = u.magnet.update(t)
            slot_available = all(other.joint is None for other in self.units)

            if u.dock_state is DockState.DOCKED and u.joint is not None:
                follow = plate.compose(u.joint.attach_pose).compose(
                    dock.tool_offset.inverse())
                local = u.cfg.spec.base_pose.inverse().compose(follow)
                clamped = u.cfg.spec.workspace_box_base().clamp_point(local.translation)
                violation = math.dist(local.translation, clamped)
                if violation > dock.release_slack_m:
                    release_demanded = True
                plate_inv = plate.inverse()
                cmd_plate = np.zeros(6)
                cmd_plate[:3] = plate_inv.rotate_vector(tuple(cmd_world[:3]))
                cmd_plate[3:] = plate_inv.rotate_vector(tuple(cmd_world[3:]))
                out_plate, slip, released = joint_transmit(u.joint, cmd_plate)
                if released:
                    release_demanded = True
                if not release_demanded:
                    w = np.zeros(6)
                    w[:3] = plate.rotate_vector(tuple(out_plate[:3]))
                    w[3:] = plate.rotate_vector(tuple(out_plate[3:]))
                    transmitted[u.name] = w
                    slips[u.name] = slip

            if u.dock_state is DockState.INTERCEPTING and magnet_on and slot_available:
                magnet_pose = u.state.pose.compose(dock.tool_offset)
                joint_candidate = try_attach(
                    magnet_pose, plate, dock.pos_tol, dock.ang_tol_rad,
                    dock.joint_kind, breaking_force=dock.breaking_force,
                    friction_mu=dock.friction_mu, contact_radius=dock.contact_radius)

            ctx = DockContext(
                intercept_wanted=triggers[u.name],
                arbitration_winner=(u.index == winner),
                magnet_energized=magnet_on,
                attach_candidate=joint_candidate is not None,
                slot_available=slot_available,
                release_demanded=release_demanded,
                magnet_off_settled=not magnet_on,
            )
            new_state, evs = dock_step(u.dock_state, ctx)
            for ev in evs:
                events.append(f"{ev}:{u.name}")
                if ev == "intercept":
                    u.magnet.command(True, t)
                elif ev == "attach":
                    u.joint = joint_candidate
                elif ev in ("release", "abort"):
                    u.joint = None
                    u.magnet.command(False, t)
                    transmitted[u.name] = np.zeros(6)
                    if ev == "release":
                        u.cooldown_until = t + dock.reattach_cooldown_s
            u.dock_state = new_state
        return transmitted, slips

    def _arm_control(self, t: float, plate: RigidTransform,
                     cmd_world: np.ndarray, events: list[str]) -> dict:
        cfg = self.cfg
        dock = cfg.dock
        targets = {}
        for u in self.units:
            spec = u.cfg.spec
            if u.dock_state is DockState.DOCKED and u.joint is not None:
                follow = plate.compose(u.joint.attach_pose).compose(
                    dock.tool_offset.inverse())
                local = spec.base_pose.inverse().compose(follow)
                clamped_pos = spec.workspace_box_base().clamp_point(local.translation)
                pinned = spec.base_pose.compose(
                    RigidTransform(local.rotation, clamped_pos))
                u.clamped = clamped_pos != local.translation
                u.state = ArmState(pose=pinned, clamped=u.clamped)
                disp = impedance_displacement(tuple(cmd_world[:3]), spec.stiffness)
                target = RigidTransform(
                    pinned.rotation,
                    tuple(p + d for p, d in zip(pinned.translation, disp)))
            elif u.dock_state is DockState.INTERCEPTING:
                cmd = pursue(u.state.pose, plate, u.cfg.pursuit_speed, self.dt,
                             base_pose=spec.base_pose, tool_offset=dock.tool_offset)
                u.state = arm_step(spec, u.state, cmd, self.dt)
                u.clamped = u.state.clamped
                target = spec.base_pose.compose(cmd.target)
            elif u.dock_state is DockState.RELEASING:
                hold = spec.base_pose.inverse().compose(u.state.pose)
                cmd = ArmCommand(target=hold, speed_limit=u.cfg.pursuit_speed)
                u.state = arm_step(spec, u.state, cmd, self.dt)
                u.clamped = False
                target = u.state.pose
            else:
                park = RigidTransform.from_translation(u.cfg.park_position)
                cmd = ArmCommand(target=spec.base_pose.inverse().compose(park),
                                 speed_limit=u.cfg.pursuit_speed)
                u.state = arm_step(spec, u.state, cmd, self.dt)
                u.clamped = u.state.clamped
                target = park
            targets[u.name] = target
            events.append(f"arm_target:{u.name}")
        return targets

    def _tick(self, tick: int) -> None:
        cfg = self.cfg
        t = tick * self.dt
        events: list[str] = []

        hand = self._hand_for_tick(t, events, tick)
        self._update_hand_colliders(hand)

        try:
            _, impulses = step_world(self.world, self.dt)
        except SimulationDiverged as exc:
            raise SimulationDiverged(f"t={t:.3f}s: {exc}") from exc

        plate_truth = hand.wrist_pose.compose(cfg.dock.plate_offset)
        plate = self._tracked_plate(plate_truth)
        plate_pos = np.asarray(plate.translation)
        plate_vel = (np.zeros(3) if self._prev_plate is None
                     else (plate_pos - self._prev_plate) / self.dt)
        self._prev_plate = plate_pos

        docked = self._docked_unit()
        routed = route_forces(impulses, hand, self.glove_cmd,
                              docked is not None, self.dt,
                              arm_base=docked.cfg.spec.base_pose if docked else None,
                              reference_point=plate.translation)

        rendering = docked is not None and cfg.condition is Condition.FORCE_FEEDBACK
        filter_input = np.zeros(6)
        if rendering:
            filter_input[:3] = routed.net_force
            if cfg.coordinator.render_net_torque:
                filter_input[3:] = routed.net_torque
        filtered = self.filter.update(filter_input)

        cmd_world = np.zeros(6)
        if docked is not None:
            if cfg.condition is Condition.FORCE_FEEDBACK:
                # The arm's own actuation saturates at its envelope; injected
                # loads model external pulls on the joint and bypass it.
                spec = docked.cfg.spec
                cmd_world[:3] = np.clip(filtered[:3], -np.asarray(spec.max_force),
                                        np.asarray(spec.max_force))
                cmd_world[3:] = np.clip(filtered[3:], -np.asarray(spec.max_torque),
                                        np.asarray(spec.max_torque))
            cmd_world += np.asarray(cfg.sample_injected_load(t))

        transmitted, slips = self._dock_management(t, plate, plate_vel,
                                                   cmd_world, events)
        targets = self._arm_control(t, plate, cmd_world, events)

        support = {}
        for body in self.world.bodies:
            if body.kind is not BodyKind.DYNAMIC:
                continue
            total = 0.0
            for imp in impulses:
                if imp.hand_collider is not None and imp.body_b == body.name:
                    total += imp.magnitude / self.dt * imp.normal[1]
            support[body.name] = float(total)

        arms_rec = []
        for u in self.units:
            magnet_pose = u.state.pose.compose(cfg.dock.tool_offset)
            arms_rec.append({
                "name": u.name,
                "state": u.dock_state.value,
                "pos": _fl(u.state.pose.translation),
                "quat": _fl(u.state.pose.rotation),
                "target": _fl(targets[u.name].translation),
                "rendered": _fl(transmitted[u.name]),
                "slip": bool(slips[u.name]),
                "clamped": bool(u.clamped),
                "tool_dist": float(magnet_pose.translation_distance_to(plate_truth)),
                "magnet": bool(u.magnet.effective),
            })

        self.log.append({
            "tick": tick,
            "t": float(t),
            "dt": float(self.dt),
            "events": events,
            "wrist": _fl(hand.wrist_pose.translation),
            "flex": _fl(hand.flex),
            "stops": _fl(self.glove_cmd.stop_angle),
            "resist": _fl(hand.resist_torques),
            "sensor_clamps": int(sum(hand.clamp_flags)),
            "cmd_wrench": _fl(cmd_world),
            "net_force": _fl(routed.net_force),
            "net_torque": _fl(routed.net_torque),
            "residual": _fl(routed.residual),
            "paired": float(routed.paired_magnitude),
            "contacts": int(routed.hand_contact_count),
            "support": support,
            "docked_arm": docked.name if docked else None,
            "arms": arms_rec,
        })


def run_scenario(cfg: ScenarioConfig) -> MetricLog:
    """Execute one scenario deterministically and return its telemetry."""
    return Coordinator(cfg).run()


@dataclass(frozen=True, slots=True)
class OracleResult:
    """Weight ranking inferred from rendered support forces."""

    verdict: str                      # ordered | indistinguishable | tie
    order: tuple[str, ...]            # ascending inferred weight
    mean_force: dict
    confidence: float
    ties: tuple[tuple[str, ...], ...] = ()


def weight_oracle(log: MetricLog, lift_windows: dict,
                  noise_floor_n: float = 0.02) -> OracleResult:
    """Rank bodies by time-averaged rendered support force over their windows.

    Confidence is the smallest pairwise relative force gap between adjacent
    ranks. When every mean sits below the noise floor the cans cannot be told
    apart; adjacent means closer than the floor are reported as ties rather
    than forced into an order.
    """
    if not lift_windows:
        raise ValueError("lift_windows must contain at least one window")
    means = {}
    for name, (t0, t1) in lift_windows.items():
        if not t0 < t1:
            raise ValueError(f"window for {name!r} must satisfy t0 < t1")
        samples = []
        for rec in log.records:
            if t0 <= rec["t"] <= t1:
                rendered_y = sum(arm["rendered"][1] for arm in rec["arms"])
                samples.append(-rendered_y)
        if not samples:
            raise ValueError(f"window for {name!r} contains no log records")
        means[name] = float(sum(samples) / len(samples))

    order = tuple(sorted(means, key=lambda n: (means[n], n)))
    if all(abs(means[n]) < noise_floor_n for n in order):
        return OracleResult(verdict="indistinguishable", order=order,
                            mean_force=means, confidence=0.0)

    ties = []
    group = [order[0]]
    for prev, cur in zip(order, order[1:]):
        if means[cur] - means[prev] < noise_floor_n:
            group.append(cur)
        else:
            if len(group) > 1:
                ties.append(tuple(group))
            group = [cur]
    if len(group) > 1:
        ties.append(tuple(group))
    if ties:
        return OracleResult(verdict="tie", order=order, mean_force=means,
                            confidence=0.0, ties=tuple(ties))

    confidence = min((means[hi] - means[lo]) / means[hi]
                     for lo, hi in zip(order, order[1:]))
    return OracleResult(verdict="ordered", order=order, mean_force=means,
                        confidence=float(confidence))


def summarize(log: MetricLog) -> dict:
    """Compact run summary for the CLI."""
    attaches = [(r["t"], e) for r in log.records for e in r["events"]
                if e.startswith("attach:")]
    releases = [(r["t"], e) for r in log.records for e in r["events"]
                if e.startswith("release:")]
    max_rendered = 0.0
    for r in log.records:
        for arm in r["arms"]:
            f = arm["rendered"][:3]
            max_rendered = max(max_rendered, math.sqrt(sum(x * x for x in f)))
    return {
        "scenario": log.header["scenario"],
        "condition": log.header["condition"],
        "ticks": len(log.records),
        "attach_events": attaches,
        "release_events": releases,
        "max_rendered_force_n": max_rendered,
    }
