"""Kinematic hand models for the three exoskeleton variants.

Conventions (fixed across the whole package):
  * angles in radians; zero = fully extended finger; positive flexion bends
    toward the palm.
  * palm frame: +x points distal (along extended fingers), +y lateral toward
    the thumb side, +z out of the back of the hand. The palm surface faces -z,
    so flexion is a positive rotation about the local +y axis.
  * abduction axes are the local +z axis; at a 2-DoF joint the abduction
    rotation is applied before the flexion rotation.
  * canonical joint order: fingers in model order (thumb, index, middle,
    ring), joints proximal-to-distal within a finger, abduction before
    flexion.

Link lengths and mount positions are anthropomorphic defaults (not published
hardware dimensions) and can be overridden via config; see ``load_model``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidGeometry, UnknownPhalanx, UnknownVariant

DEG = math.pi / 180.0

VARIANTS = ("DEXOP-12", "DEXOP-9", "DEXOP-7")

JOINT_KINDS = (
    "MCP-abduction",
    "MCP-flexion",
    "PIP",
    "TM-abduction",
    "TM-flexion",
    "IP",
)

# Workspace spans in degrees: flexion-type joints run [0, span], abduction
# joints are symmetric about zero. MCP-abduction span is not published; the
# +/-15 deg default is anthropomorphic.
_DEFAULT_LIMITS_DEG = {
    "MCP-flexion": (0.0, 110.0),
    "MCP-abduction": (-15.0, 15.0),
    "PIP": (0.0, 105.0),
    "TM-flexion": (0.0, 75.0),
    "TM-abduction": (-45.0, 45.0),
    "IP": (0.0, 65.0),
}

# Peak joint speeds, rad/s. The MCP figure is applied to both MCP axes.
_DEFAULT_MAX_SPEED = {
    "MCP-flexion": 35.0,
    "MCP-abduction": 35.0,
    "PIP": 15.0,
    "TM-flexion": 17.0,
    "TM-abduction": 12.0,
    "IP": 9.0,
}

# Anthropomorphic geometry defaults, meters.
DEFAULT_PROXIMAL_M = 0.045
DEFAULT_DISTAL_M = 0.035
DEFAULT_MCP_SPACING_M = 0.022
DEFAULT_TM_AXIS_SEPARATION_M = 0.010

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_world = rotation @ p_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise InvalidGeometry(f"pose shapes {r.shape}, {t.shape}")
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-9:
            raise InvalidGeometry("rotation not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidGeometry("rotation determinant not +1 within 1e-9")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis: np.ndarray, angle: float,
                        translation: Sequence[float] | None = None) -> "Pose":
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-12:
            raise InvalidGeometry(f"axis norm {n} not unit within 1e-12")
        x, y, z = axis
        c, s = math.cos(angle), math.sin(angle)
        cc = 1.0 - c
        rot = np.array([
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ])
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        return Pose(rot, t)

    @staticmethod
    def from_translation(t: Sequence[float]) -> "Pose":
        return Pose(np.eye(3), np.asarray(t, dtype=float))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: axis and offset are expressed in the parent frame."""

    id: str
    kind: str
    axis: np.ndarray
    offset: Pose
    limits: tuple[float, float]
    max_speed: float

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise InvalidGeometry(f"unknown joint kind {self.kind!r}")
        axis = np.array(self.axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise InvalidGeometry(f"joint {self.id}: axis must be unit within 1e-12")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        lo, hi = self.limits
        if not lo < hi:
            raise InvalidGeometry(f"joint {self.id}: limits min must be < max")
        if not self.max_speed > 0:
            raise InvalidGeometry(f"joint {self.id}: max speed must be > 0")


@dataclass(frozen=True)
class FingerChain:
    """Ordered joint chain plus the two phalanx lengths (meters)."""

    name: str
    joints: tuple[JointSpec, ...]
    proximal_len: float
    distal_len: float

    def __post_init__(self):
        if self.proximal_len <= 0 or self.distal_len <= 0:
            raise InvalidGeometry(f"finger {self.name}: segment lengths must be > 0")
        object.__setattr__(self, "joints", tuple(self.joints))

    @property
    def dof(self) -> int:
        return len(self.joints)


@dataclass(frozen=True)
class HandModel:
    variant: str
    fingers: tuple[FingerChain, ...]
    palm: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        object.__setattr__(self, "fingers", tuple(self.fingers))
        if self.variant in VARIANTS:
            expect = {"DEXOP-12": (4, 12), "DEXOP-9": (3, 9), "DEXOP-7": (3, 7)}[self.variant]
            if (len(self.fingers), self.dof) != expect:
                raise InvalidGeometry(
                    f"{self.variant} requires {expect[0]} fingers / {expect[1]} DoF, "
                    f"got {len(self.fingers)} / {self.dof}")

    @property
    def dof(self) -> int:
        return sum(f.dof for f in self.fingers)

    @property
    def joints(self) -> tuple[JointSpec, ...]:
        return tuple(j for f in self.fingers for j in f.joints)

    @property
    def joint_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.joints)

    def finger(self, name: str) -> FingerChain:
        for f in self.fingers:
            if f.name == name:
                return f
        raise UnknownPhalanx(f"no finger named {name!r}")

    def finger_joint_indices(self, name: str) -> tuple[int, ...]:
        base = 0
        for f in self.fingers:
            if f.name == name:
                return tuple(range(base, base + f.dof))
            base += f.dof
        raise UnknownPhalanx(f"no finger named {name!r}")


@dataclass(frozen=True)
class JointState:
    """Angle vector in the model's canonical joint order."""

    angles: np.ndarray
    timestamp_ns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "angles", _as_readonly(np.atleast_1d(self.angles)))


@dataclass(frozen=True)
class ValidationReport:
    within: np.ndarray          # bool per joint, True = inside limits
    violations: tuple[str, ...]  # joint ids outside their limits

    @property
    def ok(self) -> bool:
        return bool(np.all(self.within))


@dataclass(frozen=True)
class FingerPoses:
    proximal: Pose   # frame at the proximal phalanx root (after base joints)
    distal: Pose     # frame at the distal phalanx root (after PIP/IP)
    fingertip: Pose  # distal frame advanced by the distal segment length


@dataclass(frozen=True)
class Contact:
    """Contact location: a point fixed in a phalanx frame."""

    finger: str
    phalanx: str  # "proximal" | "distal"
    point: np.ndarray

    def __post_init__(self):
        if self.phalanx not in ("proximal", "distal"):
            raise UnknownPhalanx(f"unknown phalanx {self.phalanx!r}")
        object.__setattr__(self, "point", _as_readonly(np.asarray(self.point, dtype=float)))


@dataclass(frozen=True)
class WorkspaceRow:
    joint_id: str
    kind: str
    min_deg: float
    max_deg: float
    range_deg: float
    max_speed: float


# -----------------------------------------------------------------------------
# presets
# -----------------------------------------------------------------------------

def _joint(finger: str, kind: str, axis: np.ndarray, offset: Pose,
           limits_deg: Mapping[str, tuple[float, float]],
           speeds: Mapping[str, float]) -> JointSpec:
    short = {
        "MCP-abduction": "mcp_abduction",
        "MCP-flexion": "mcp_flexion",
        "PIP": "pip",
        "TM-abduction": "tm_abduction",
        "TM-flexion": "tm_flexion",
        "IP": "ip",
    }[kind]
    lo, hi = limits_deg[kind]
    return JointSpec(
        id=f"{finger}.{short}",
        kind=kind,
        axis=axis,
        offset=offset,
        limits=(lo * DEG, hi * DEG),
        max_speed=speeds[kind],
    )


def _finger_chain(name: str, mount: Pose, abduction: bool, proximal: float,
                  distal: float, limits_deg, speeds) -> FingerChain:
    joints = []
    if abduction:
        joints.append(_joint(name, "MCP-abduction", _Z, mount, limits_deg, speeds))
        joints.append(_joint(name, "MCP-flexion", _Y, Pose.identity(), limits_deg, speeds))
    else:
        joints.append(_joint(name, "MCP-flexion", _Y, mount, limits_deg, speeds))
    joints.append(_joint(name, "PIP", _Y, Pose.from_translation([proximal, 0, 0]),
                         limits_deg, speeds))
    return FingerChain(name, tuple(joints), proximal, distal)


def _thumb_chain(mount: Pose, proximal: float, distal: float, axis_sep: float,
                 limits_deg, speeds) -> FingerChain:
    joints = (
        _joint("thumb", "TM-abduction", _Z, mount, limits_deg, speeds),
        _joint("thumb", "TM-flexion", _Y,
               Pose.from_translation([axis_sep, 0, 0]), limits_deg, speeds),
        _joint("thumb", "IP", _Y, Pose.from_translation([proximal, 0, 0]),
               limits_deg, speeds),
    )
    return FingerChain("thumb", joints, proximal, distal)


def load_model(variant: str, config: Mapping[str, object] | None = None) -> HandModel:
    """Build a preset hand model, optionally overriding geometry/limits.

    Recognized config keys (all optional):
      proximal_m / distal_m            default segment lengths for every finger
      <finger>.proximal_m, .distal_m   per-finger segment lengths
      mcp_spacing_m                    lateral distance between MCP joints
      thumb.tm_axis_separation_m       TM abduction-to-flexion axis distance
      limits_deg                       {kind: (min_deg, max_deg)} overrides
      max_speed                        {kind: rad_per_s} overrides
    """
    if variant not in VARIANTS:
        raise UnknownVariant(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    cfg = dict(config or {})

    limits_deg = dict(_DEFAULT_LIMITS_DEG)
    limits_deg.update(cfg.get("limits_deg", {}))  # type: ignore[arg-type]
    speeds = dict(_DEFAULT_MAX_SPEED)
    speeds.update(cfg.get("max_speed", {}))  # type: ignore[arg-type]

    def seg(finger: str, which: str, default: float) -> float:
        v = cfg.get(f"{finger}.{which}", cfg.get(which, default))
        v = float(v)  # type: ignore[arg-type]
        if v <= 0:
            raise InvalidGeometry(f"{finger}.{which} must be > 0, got {v}")
        return v

    spacing = float(cfg.get("mcp_spacing_m", DEFAULT_MCP_SPACING_M))  # type: ignore[arg-type]
    axis_sep = float(cfg.get("thumb.tm_axis_separation_m", DEFAULT_TM_AXIS_SEPARATION_M))  # type: ignore[arg-type]
    if axis_sep <= 0:
        raise InvalidGeometry("thumb.tm_axis_separation_m must be > 0")

    abduction = variant in ("DEXOP-12", "DEXOP-9")
    finger_names = ["index", "middle"] + (["ring"] if variant == "DEXOP-12" else [])

    # Thumb mount: opposed pose on the +y side of the palm. Arbitrary
    # anthropomorphic default; nothing downstream is geometry-absolute.
    thumb_mount = Pose.from_axis_angle(_Z, 60.0 * DEG, [0.025, 0.040, 0.0])
    fingers = [
        _thumb_chain(thumb_mount, seg("thumb", "proximal_m", DEFAULT_PROXIMAL_M),
                     seg("thumb", "distal_m", DEFAULT_DISTAL_M), axis_sep,
                     limits_deg, speeds)
    ]
    lateral = {"index": spacing, "middle": 0.0, "ring": -spacing}
    for name in finger_names:
        mount = Pose.from_translation([0.080, lateral[name], 0.0])
        fingers.append(_finger_chain(
            name, mount, abduction,
            seg(name, "proximal_m", DEFAULT_PROXIMAL_M),
            seg(name, "distal_m", DEFAULT_DISTAL_M),
            limits_deg, speeds))
    return HandModel(variant=variant, fingers=tuple(fingers))


# -----------------------------------------------------------------------------
# operations
# -----------------------------------------------------------------------------

def _check_state(model: HandModel, state: JointState) -> np.ndarray:
    q = np.asarray(state.angles, dtype=float)
    if q.shape != (model.dof,):
        raise DimensionMismatch(
            f"state has {q.shape[0] if q.ndim == 1 else q.shape} angles, "
            f"model {model.variant} has {model.dof} DoF")
    return q


def validate_state(model: HandModel, state: JointState) -> ValidationReport:
    """Flag joints outside [min, max]. Never mutates the state."""
    q = _check_state(model, state)
    joints = model.joints
    within = np.array([j.limits[0] <= qi <= j.limits[1] for j, qi in zip(joints, q)])
    violations = tuple(j.id for j, ok in zip(joints, within) if not ok)
    return ValidationReport(within=within, violations=violations)


def _chain(model: HandModel, q: np.ndarray):
    """Per finger: list of (joint, world origin, world axis, frame after joint)."""
    out = {}
    i = 0
    for f in model.fingers:
        frame = model.palm
        rows = []
        for j in f.joints:
            pre = frame.compose(j.offset)
            origin = pre.translation
            axis = pre.rotation @ j.axis
            frame = pre.compose(Pose.from_axis_angle(j.axis, q[i]))
            rows.append((j, origin, axis, frame))
            i += 1
        out[f.name] = rows
    return out


def forward_kinematics(model: HandModel, state: JointState) -> dict[str, FingerPoses]:
    """World pose of each phalanx frame and fingertip, per finger."""
    q = _check_state(model, state)
    chains = _chain(model, q)
    result = {}
    for f in model.fingers:
        rows = chains[f.name]
        distal_frame = rows[-1][3]
        proximal_frame = rows[-2][3] if len(rows) >= 2 else rows[-1][3]
        tip = distal_frame.compose(Pose.from_translation([f.distal_len, 0, 0]))
        result[f.name] = FingerPoses(proximal=proximal_frame, distal=distal_frame,
                                     fingertip=tip)
    return result


def _phalanx_frame_and_joints(model: HandModel, chains, contact: Contact):
    f = model.finger(contact.finger)
    rows = chains[f.name]
    if contact.phalanx == "distal":
        frame = rows[-1][3]
        active = len(rows)
    else:
        frame = rows[-2][3] if len(rows) >= 2 else rows[-1][3]
        active = max(len(rows) - 1, 1)
    return f, rows, frame, active


def contact_point_world(model: HandModel, state: JointState, contact: Contact) -> np.ndarray:
    q = _check_state(model, state)
    chains = _chain(model, q)
    _, _, frame, _ = _phalanx_frame_and_joints(model, chains, contact)
    return frame.apply(contact.point)


def contact_jacobian(model: HandModel, state: JointState, contact: Contact) -> np.ndarray:
    """3 x DoF linear-velocity Jacobian of the contact point.

    Columns for joints distal to the contact's phalanx (and for other
    fingers' joints) are exactly zero.
    """
    q = _check_state(model, state)
    chains = _chain(model, q)
    f, rows, frame, active = _phalanx_frame_and_joints(model, chains, contact)
    p = frame.apply(contact.point)
    jac = np.zeros((3, model.dof))
    base = model.finger_joint_indices(f.name)[0]
    for k in range(active):
        _, origin, axis, _ = rows[k]
        jac[:, base + k] = np.cross(axis, p - origin)
    return jac


def contact_jacobian_spatial(model: HandModel, state: JointState,
                             contact: Contact) -> np.ndarray:
    """Experimental 6 x DoF spatial Jacobian (linear rows then angular rows).

    The angular rows let a caller map contact couples to joint torques via
    the transpose; the supported torque-recovery path treats contacts as
    point forces and uses the 3 x DoF linear Jacobian only.
    """
    q = _check_state(model, state)
    chains = _chain(model, q)
    f, rows, frame, active = _phalanx_frame_and_joints(model, chains, contact)
    p = frame.apply(contact.point)
    jac = np.zeros((6, model.dof))
    base = model.finger_joint_indices(f.name)[0]
    for k in range(active):
        _, origin, axis, _ = rows[k]
        jac[:3, base + k] = np.cross(axis, p - origin)
        jac[3:, base + k] = axis
    return jac


def fingertip_contact(model: HandModel, finger: str) -> Contact:
    f = model.finger(finger)
    return Contact(finger=finger, phalanx="distal", point=np.array([f.distal_len, 0.0, 0.0]))


def workspace_report(model: HandModel) -> list[WorkspaceRow]:
    """Per-joint range (degrees) and peak speed, ready for CSV/JSONL output."""
    rows = []
    for j in model.joints:
        lo = round(math.degrees(j.limits[0]), 9)
        hi = round(math.degrees(j.limits[1]), 9)
        rows.append(WorkspaceRow(
            joint_id=j.id, kind=j.kind, min_deg=lo, max_deg=hi,
            range_deg=round(hi - lo, 9), max_speed=j.max_speed))
    return rows


def random_state(model: HandModel, rng: np.random.Generator,
                 margin: float = 0.0) -> JointState:
    """Uniform random in-limit state; margin shrinks the range at both ends."""
    lo = np.array([j.limits[0] for j in model.joints])
    hi = np.array([j.limits[1] for j in model.joints])
    span = hi - lo
    q = rng.uniform(lo + margin * span, hi - margin * span)
    return JointState(angles=q)
