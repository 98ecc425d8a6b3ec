"""Capability algebra: what a hybrid of docked devices can do, and where.

Composing grounded arms with a worn glove yields pose-dependent envelopes:
inside an arm's reach the hybrid can render ground-referenced force, outside
it degrades to the glove alone. Regions where two arms overlap stack their
force contributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .devices import ArmSpec, GloveSpec
from .docking import (DEFAULT_BREAKING_FORCE_N, DEFAULT_FRICTION_MU,
                      DockJointKind)
from .frames import RigidTransform
from .geometry import Box, Vec3


class _Unbounded:
    """Explicit marker for an unlimited range; never a sentinel float."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "unbounded"


UNBOUNDED = _Unbounded()

ROT_AXES = ("rx", "ry", "rz")


class CapabilityError(ValueError):
    """Invalid device topology for capability composition."""


@dataclass(frozen=True, slots=True)
class DockLink:
    """Declares that a grounded arm can dock the given glove via a joint kind."""

    arm_index: int
    glove_index: int
    kind: DockJointKind
    breaking_force: float = DEFAULT_BREAKING_FORCE_N
    friction_mu: float = DEFAULT_FRICTION_MU


@dataclass(frozen=True, slots=True)
class ForceRegion:
    """One arm's reach box with the per-axis force it contributes inside it."""

    arm_name: str
    box: Box
    force: Vec3
    torque: tuple[tuple[str, float], ...]


@dataclass(frozen=True, slots=True)
class TranslationVolume:
    boxes: tuple[Box, ...]
    unbounded_outside: bool


@dataclass(frozen=True, slots=True)
class HybridCapability:
    """Envelope description of a composed device set."""

    translation_volume: TranslationVolume
    rotation_volume: tuple          # per base axis: degrees or UNBOUNDED
    force_envelope: Vec3            # per-axis max over the whole volume
    torque_envelope: tuple[tuple[str, float], ...]
    degraded_dofs: tuple[str, ...]
    force_regions: tuple[ForceRegion, ...]
    glove_torques: tuple[tuple[str, float], ...]
    glove_present: bool


@dataclass(frozen=True, slots=True)
class PointCapability:
    """Envelope available at one specific hand pose."""

    force: Vec3
    torque: tuple[tuple[str, float], ...]
    reachable_by: tuple[str, ...]
    grounded: bool


def _validate_topology(arms: Sequence[ArmSpec], gloves: Sequence[GloveSpec],
                       links: Sequence[DockLink]) -> None:
    for i, link in enumerate(links):
        if not 0 <= link.arm_index < len(arms):
            raise CapabilityError(f"links[{i}]: arm index {link.arm_index} out of range")
        if not 0 <= link.glove_index < len(gloves):
            raise CapabilityError(f"links[{i}]: glove index {link.glove_index} out of range")
    # Parents must be grounded and children worn, so the dock graph is a
    # forest rooted at the arms by construction; anything else would cycle.
    seen = set()
    for i, link in enumerate(links):
        key = (link.arm_index, link.glove_index)
        if key in seen:
            raise CapabilityError(f"links[{i}]: duplicate dock edge {key}")
        seen.add(key)


def _arm_force_through_joint(spec: ArmSpec, link: DockLink) -> Vec3:
    force = list(spec.max_force)
    for i, label in enumerate(("tx", "ty", "tz")):
        if label in link.kind.free:
            force[i] = 0.0
        elif label in link.kind.friction_limited:
            force[i] = min(force[i], link.friction_mu * link.breaking_force)
    return tuple(force)


def _arm_torque_through_joint(spec: ArmSpec, name: str, link: DockLink
                              ) -> tuple[tuple[str, float], ...]:
    out = []
    for i, axis in enumerate(ROT_AXES):
        if axis in link.kind.degraded_dofs():
            continue
        out.append((f"{name}:{axis}", spec.max_torque[i]))
    return tuple(out)


def _glove_torques(glove: GloveSpec, name: str) -> tuple[tuple[str, float], ...]:
    return tuple((f"{name}:finger{i}", glove.max_joint_torque)
                 for i in range(glove.actuated_dofs))


def _max_force_over_cells(regions: Sequence[ForceRegion]) -> Vec3:
    """Per-axis maximum of summed contributions over the box arrangement.

    Only subsets whose boxes share interior volume can stack force, so the
    maximum is taken over all subsets with a non-degenerate intersection.
    Adjacent (touching) boxes share no interior and do not stack.
    """
    if not regions:
        return (0.0, 0.0, 0.0)
    best = [0.0, 0.0, 0.0]
    n = len(regions)
    for mask in range(1, 1 << n):
        chosen = [regions[i] for i in range(n) if mask & (1 << i)]
        inter = chosen[0].box
        for r in chosen[1:]:
            inter = inter.intersection(r.box)
            if inter is None:
                break
        if inter is None:
            continue
        for axis in range(3):
            total = sum(r.force[axis] for r in chosen)
            best[axis] = max(best[axis], total)
    return tuple(best)


def compose_capability(arms: Sequence[ArmSpec], gloves: Sequence[GloveSpec],
                       links: Sequence[DockLink],
                       arm_names: Sequence[str] | None = None,
                       glove_names: Sequence[str] | None = None) -> HybridCapability:
    """Compose device specs and dock links into the hybrid envelope.

    Link the same glove to several arms to describe multi-arm layouts: arms
    with overlapping reach stack their force where they overlap, adjacent
    arms extend the enhanced region instead (handover).
    """
    _validate_topology(arms, gloves, links)
    arm_names = list(arm_names or (a.name for a in arms))
    glove_names = list(glove_names or (g.name for g in gloves))

    linked_arms = sorted({l.arm_index for l in links})
    if links:
        active = [(i, next(l for l in links if l.arm_index == i)) for i in linked_arms]
    else:
        active = [(i, None) for i in range(len(arms))]

    regions = []
    torques: list[tuple[str, float]] = []
    degraded: list[str] = []
    for i, link in active:
        spec = arms[i]
        name = arm_names[i]
        if link is None:
            force = tuple(spec.max_force)
            arm_torque = tuple((f"{name}:{ax}", spec.max_torque[j])
                               for j, ax in enumerate(ROT_AXES))
        else:
            force = _arm_force_through_joint(spec, link)
            arm_torque = _arm_torque_through_joint(spec, name, link)
            degraded.extend(f"{name}:{d}" for d in link.kind.degraded_dofs())
        regions.append(ForceRegion(arm_name=name, box=spec.workspace_box_world(),
                                   force=force, torque=arm_torque))
        torques.extend(arm_torque)

    glove_torques: list[tuple[str, float]] = []
    for g, name in zip(gloves, glove_names):
        glove_torques.extend(_glove_torques(g, name))
    torques.extend(glove_torques)

    rotation: list = [UNBOUNDED, UNBOUNDED, UNBOUNDED]
    if active and arms:
        degraded_axes = set()
        for i, link in active:
            if link is not None:
                degraded_axes |= {d for d in link.kind.degraded_dofs() if d in ROT_AXES}
        for j, axis in enumerate(ROT_AXES):
            if axis in degraded_axes:
                rotation[j] = UNBOUNDED
            else:
                rotation[j] = max(arms[i].rot_range_deg[j] for i, _ in active)
    elif not gloves:
        rotation = [0.0, 0.0, 0.0]

    return HybridCapability(
        translation_volume=TranslationVolume(
            boxes=tuple(r.box for r in regions),
            unbounded_outside=bool(gloves)),
        rotation_volume=tuple(rotation),
        force_envelope=_max_force_over_cells(regions),
        torque_envelope=tuple(torques),
        degraded_dofs=tuple(degraded),
        force_regions=tuple(regions),
        glove_torques=tuple(glove_torques),
        glove_present=bool(gloves),
    )


def capability_at(cap: HybridCapability, pose) -> PointCapability:
    """Envelope available at a hand pose: sum of the arms that reach it."""
    if isinstance(pose, RigidTransform):
        point = pose.translation
    else:
        point = tuple(float(c) for c in pose)
    force = [0.0, 0.0, 0.0]
    torque: list[tuple[str, float]] = []
    reachable = []
    for region in cap.force_regions:
        if region.box.contains(point):
            reachable.append(region.arm_name)
            for axis in range(3):
                force[axis] += region.force[axis]
            torque.extend(region.torque)
    torque.extend(cap.glove_torques)
    return PointCapability(force=tuple(force), torque=tuple(torque),
                           reachable_by=tuple(reachable), grounded=bool(reachable))


def _fmt_mm(meters: float) -> int:
    return round(meters * 1000.0)


def _fmt_rotation(rotation) -> str:
    parts = []
    for r in rotation:
        parts.append("inf" if r is UNBOUNDED else f"{r:g} deg")
    return " x ".join(parts)


def capability_to_dict(cap: HybridCapability) -> dict:
    """Machine-readable capability report."""
    boxes = []
    for region in cap.force_regions:
        boxes.append({
            "arm": region.arm_name,
            "center_m": list(region.box.center),
            "extents_m": list(region.box.extents),
            "extents_mm": [_fmt_mm(e) for e in region.box.extents],
            "force_n": list(region.force),
        })
    return {
        "translation": {
            "boxes": boxes,
            "unbounded_outside": cap.translation_volume.unbounded_outside,
        },
        "rotation_deg": [None if r is UNBOUNDED else r for r in cap.rotation_volume],
        "force_envelope_n": list(cap.force_envelope),
        "torque_envelope_nm": [[label, value] for label, value in cap.torque_envelope],
        "degraded_dofs": list(cap.degraded_dofs),
        "glove_present": cap.glove_present,
    }


def capability_report(cap: HybridCapability) -> str:
    """Human-readable capability report."""
    lines = ["hybrid capability"]
    tv = cap.translation_volume
    if tv.boxes:
        for region in cap.force_regions:
            e = region.box.extents
            lines.append(f"  reach[{region.arm_name}]: "
                         f"{_fmt_mm(e[0])} x {_fmt_mm(e[1])} x {_fmt_mm(e[2])} mm "
                         f"at {tuple(round(c, 4) for c in region.box.center)}")
    if tv.unbounded_outside:
        lines.append("  translation outside enhanced regions: unbounded (worn device only)")
    lines.append(f"  rotation: {_fmt_rotation(cap.rotation_volume)}")
    fx, fy, fz = cap.force_envelope
    lines.append(f"  force: {fx:g} / {fy:g} / {fz:g} N (zero where ungrounded)")
    torque_txt = ", ".join(f"{label}={value:g} Nm" for label, value in cap.torque_envelope)
    lines.append(f"  torque: {torque_txt}")
    if cap.degraded_dofs:
        lines.append(f"  degraded DOFs: {', '.join(cap.degraded_dofs)}")
    return "\n".join(lines)
