"""Exoskeleton-to-hand coupling: planar four-bar stages and coaxial pass-throughs.

A four-bar is solved in the plane of its ground link. The fixed pivots sit at
O2 = (0, 0) and O4 = (ground, 0); the input crank of length ``input_link``
pivots at O2, the output crank of length ``output_link`` at O4, and the
coupler of length ``coupler`` joins their moving ends A and B. Angles are
measured counterclockwise from the ground line. Mounting offsets shift the
caller's angle parameters relative to the physical cranks:

    link angle  psi = theta_in + input_offset
    returned    phi = (output crank angle) - output_offset

Branches: the loop closure has two roots, the two intersections of the
coupler circle about A with the output circle about O4. "open" takes the
intersection on the counterclockwise side of the directed line A->O4,
"crossed" the other. With a ``branch_hint`` (the previous output angle) the
root nearest the hint wins and the result is unwrapped into the hint's
neighborhood, which keeps swept outputs continuous through +/-pi.

Chained stages: the coupler of a stage-1 four-bar is the ground frame of its
stage-2. Stage-2 input/output angles are therefore measured from the coupler
direction, and the stage-2 ground length must equal the stage-1 coupler
length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BranchJump,
    DimensionMismatch,
    InvalidGeometry,
    NotAssemblable,
    SingularConfiguration,
)
from .hand_model import HandModel, JointState

TWO_PI = 2.0 * math.pi

DEFAULT_STANDOFF_M = 0.060
DEFAULT_STAGE2_CRANK_M = 0.020

BRANCHES = ("open", "crossed")
STAGE_KINDS = ("four-bar", "coaxial", "chained-four-bar-stage2")

# Continuity threshold: both roots farther than this from the hint => BranchJump.
BRANCH_CONTINUITY_RAD = 0.5

# Transmission angle tolerance: |sin(gamma)| below this is a toggle position.
SINGULAR_SIN_TOL = 1e-6


def wrap_pi(x: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(x, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def circ_diff(a: float, b: float) -> float:
    """Signed circular difference a - b in (-pi, pi]."""
    return wrap_pi(a - b)


@dataclass(frozen=True)
class FourBarGeometry:
    """Link lengths in meters, mounting offsets in radians."""

    ground: float
    input_link: float
    coupler: float
    output_link: float
    input_offset: float = 0.0
    output_offset: float = 0.0
    branch: str = "open"

    def __post_init__(self):
        for name in ("ground", "input_link", "coupler", "output_link"):
            if getattr(self, name) <= 0:
                raise InvalidGeometry(f"{name} must be > 0")
        if self.branch not in BRANCHES:
            raise InvalidGeometry(f"branch must be one of {BRANCHES}")

    def validate_assemblable(self, theta_ref: float = 0.0) -> None:
        """Stages entering a LinkageModel must close at their reference angle."""
        psi = theta_ref + self.input_offset
        d = _pivot_distance(self, psi)
        lo, hi = abs(self.coupler - self.output_link), self.coupler + self.output_link
        tol = 1e-12 * (self.coupler + self.output_link)
        if not (lo - tol <= d <= hi + tol):
            raise NotAssemblable(
                f"geometry not assemblable at reference angle {theta_ref}: "
                f"pivot distance {d:.6g} outside [{lo:.6g}, {hi:.6g}]")


@dataclass(frozen=True)
class AssemblyRange:
    """Assemblable |input link angle| interval, as bounds in [0, pi]."""

    empty: bool
    lo: float = 0.0
    hi: float = 0.0

    @property
    def full(self) -> bool:
        return (not self.empty) and self.lo == 0.0 and self.hi == math.pi

    def contains(self, psi: float) -> bool:
        if self.empty:
            return False
        return self.lo <= abs(wrap_pi(psi)) <= self.hi


@dataclass(frozen=True)
class GrashofReport:
    classification: str  # crank-rocker | double-crank | double-rocker | change-point | non-Grashof
    assemblable: AssemblyRange


@dataclass(frozen=True)
class FourBarSolution:
    phi: float        # output angle (offset applied, unwrapped toward the hint)
    psi: float        # input link angle from the ground line
    phi_raw: float    # output crank angle from the ground line, in (-pi, pi]
    coupler_angle: float  # coupler direction from the ground line
    a_point: np.ndarray
    b_point: np.ndarray


def _pivot_distance(geom: FourBarGeometry, psi: float) -> float:
    a, g = geom.input_link, geom.ground
    return math.sqrt(max(a * a + g * g - 2.0 * a * g * math.cos(psi), 0.0))


def grashof_check(geom: FourBarGeometry) -> GrashofReport:
    """Grashof classification plus the assemblable input-angle range.

    Degenerate geometries never raise: they come back non-Grashof with an
    empty range.
    """
    lengths = {
        "ground": geom.ground,
        "input": geom.input_link,
        "coupler": geom.coupler,
        "output": geom.output_link,
    }
    ordered = sorted(lengths.items(), key=lambda kv: kv[1])
    s_name, s = ordered[0]
    l = ordered[-1][1]
    p, q = ordered[1][1], ordered[2][1]
    tol = 1e-12 * (s + p + q + l)

    rng = _assemblable_range(geom)
    if abs((s + l) - (p + q)) <= tol:
        cls = "change-point"
    elif s + l < p + q:
        cls = {"input": "crank-rocker", "output": "crank-rocker",
               "ground": "double-crank", "coupler": "double-rocker"}[s_name]
    else:
        cls = "non-Grashof"
    if rng.empty:
        cls = "non-Grashof"
    return GrashofReport(classification=cls, assemblable=rng)


def _assemblable_range(geom: FourBarGeometry) -> AssemblyRange:
    a, g = geom.input_link, geom.ground
    b, c = geom.coupler, geom.output_link
    d_min, d_max = abs(g - a), g + a         # over psi in [0, pi]
    need_lo, need_hi = abs(b - c), b + c
    if d_min > need_hi or d_max < need_lo:
        return AssemblyRange(empty=True)

    def psi_at(d: float) -> float:
        cosv = (a * a + g * g - d * d) / (2.0 * a * g)
        return math.acos(min(1.0, max(-1.0, cosv)))

    lo = 0.0 if d_min >= need_lo else psi_at(need_lo)
    hi = math.pi if d_max <= need_hi else psi_at(need_hi)
    if lo > hi:
        return AssemblyRange(empty=True)
    return AssemblyRange(empty=False, lo=lo, hi=hi)


def _roots(geom: FourBarGeometry, psi: float) -> tuple[np.ndarray, list[float], np.ndarray]:
    """Both output-crank roots at input link angle psi.

    Returns (A, [phi_open, phi_crossed], B stacked 2x2). Raises NotAssemblable
    when the coupler/output circles do not intersect.
    """
    a, g = geom.input_link, geom.ground
    b, c = geom.coupler, geom.output_link
    A = np.array([a * math.cos(psi), a * math.sin(psi)])
    O4 = np.array([g, 0.0])
    u = O4 - A
    d = float(np.hypot(u[0], u[1]))
    tol = 1e-12 * (b + c)
    if d < abs(b - c) - tol or d > b + c + tol or d == 0.0:
        raise NotAssemblable(
            f"no closure at input angle {psi:.6g}: pivot distance {d:.6g}, "
            f"coupler {b}, output {c}")
    d1 = (d * d + b * b - c * c) / (2.0 * d)
    h = math.sqrt(max(b * b - d1 * d1, 0.0))
    uhat = u / d
    nhat = np.array([-uhat[1], uhat[0]])  # ccw normal of A->O4
    M = A + d1 * uhat
    b_open = M + h * nhat
    b_crossed = M - h * nhat
    phis = [math.atan2(bp[1] - 0.0, bp[0] - g) for bp in (b_open, b_crossed)]
    return A, phis, np.stack([b_open, b_crossed])


def closure_residual(geom: FourBarGeometry, theta_in: float, phi_out: float) -> float:
    """|distance(A, B) - coupler| for the given input/output pair, meters."""
    psi = theta_in + geom.input_offset
    raw = phi_out + geom.output_offset
    a, g, c = geom.input_link, geom.ground, geom.output_link
    ax, ay = a * math.cos(psi), a * math.sin(psi)
    bx, by = g + c * math.cos(raw), c * math.sin(raw)
    return abs(math.hypot(bx - ax, by - ay) - geom.coupler)


def solve_fourbar(geom: FourBarGeometry, theta_in: float,
                  branch_hint: float | None = None) -> float:
    return solve_fourbar_full(geom, theta_in, branch_hint).phi


def solve_fourbar_full(geom: FourBarGeometry, theta_in: float,
                       branch_hint: float | None = None) -> FourBarSolution:
    """Solve loop closure; pick the root continuous with the hint (or the
    declared branch when no hint is given)."""
    psi = theta_in + geom.input_offset
    A, phis, bs = _roots(geom, psi)
    candidates = [wrap_pi(p - geom.output_offset) for p in phis]
    if branch_hint is None:
        idx = 0 if geom.branch == "open" else 1
        phi = candidates[idx]
    else:
        dists = [abs(circ_diff(c, branch_hint)) for c in candidates]
        idx = int(np.argmin(dists))
        if dists[idx] > BRANCH_CONTINUITY_RAD:
            raise BranchJump(
                f"both roots ({candidates[0]:.4g}, {candidates[1]:.4g}) farther than "
                f"{BRANCH_CONTINUITY_RAD} rad from hint {branch_hint:.4g}")
        phi = branch_hint + circ_diff(candidates[idx], branch_hint)
    b_pt = bs[idx]
    coupler_angle = math.atan2(b_pt[1] - A[1], b_pt[0] - A[0])
    return FourBarSolution(phi=phi, psi=psi, phi_raw=phis[idx],
                           coupler_angle=coupler_angle, a_point=A, b_point=b_pt)


def _implicit_ratio(geom: FourBarGeometry, psi: float, phi_raw: float) -> float:
    """dphi/dtheta at a known (input link angle, output crank angle) pair."""
    a, c = geom.input_link, geom.output_link
    A = np.array([a * math.cos(psi), a * math.sin(psi)])
    B = np.array([geom.ground + c * math.cos(phi_raw), c * math.sin(phi_raw)])
    O4 = np.array([geom.ground, 0.0])
    coupler_v = B - A
    output_v = B - O4
    sin_gamma = abs(coupler_v[0] * output_v[1] - coupler_v[1] * output_v[0]) / (
        geom.coupler * c)
    if sin_gamma < SINGULAR_SIN_TOL:
        raise SingularConfiguration(
            f"transmission angle degenerate (|sin|={sin_gamma:.3g})")
    diff = A - B
    da = a * np.array([-math.sin(psi), math.cos(psi)])
    db = c * np.array([-math.sin(phi_raw), math.cos(phi_raw)])
    f_theta = 2.0 * float(diff @ da)
    f_phi = -2.0 * float(diff @ db)
    return -f_theta / f_phi


def mechanical_advantage(geom: FourBarGeometry, theta_in: float,
                         branch_hint: float | None = None) -> float:
    """Transmission ratio dphi/dtheta via implicit differentiation of the
    loop closure. Static torques follow tau_out = tau_in / ratio."""
    sol = solve_fourbar_full(geom, theta_in, branch_hint)
    return _implicit_ratio(geom, sol.psi, sol.phi_raw)


class BranchTracker:
    """First-order branch continuation for sweeps.

    Near a change point the two closure roots pinch together, so picking the
    root nearest the previous output can hop branches. Predicting the next
    output through the transmission ratio at the last solution keeps the
    tracked assembly on its smooth continuation.
    """

    def __init__(self, theta: float | None = None, phi: float | None = None):
        self.theta = theta
        self.phi = phi

    def hint(self, geom: FourBarGeometry, theta: float) -> float | None:
        if self.phi is None:
            return None
        if self.theta is None:
            return self.phi
        try:
            ratio = _implicit_ratio(geom, self.theta + geom.input_offset,
                                    self.phi + geom.output_offset)
        except SingularConfiguration:
            ratio = 0.0
        step = ratio * (theta - self.theta)
        if abs(step) > 0.9 * BRANCH_CONTINUITY_RAD:
            step = math.copysign(0.9 * BRANCH_CONTINUITY_RAD, step)
        return self.phi + step

    def update(self, theta: float, phi: float) -> None:
        self.theta = theta
        self.phi = phi


def sweep(geom: FourBarGeometry, thetas: Sequence[float],
          initial_hint: float | None = None) -> list[tuple[float, float, float]]:
    """Sweep theta with branch continuity. Rows: (theta, phi, ratio).

    ratio is NaN at singular configurations rather than aborting the sweep.
    """
    rows = []
    tracker = BranchTracker(phi=initial_hint)
    for theta in thetas:
        hint = tracker.hint(geom, theta)
        sol = solve_fourbar_full(geom, theta, branch_hint=hint)
        try:
            ratio = _implicit_ratio(geom, sol.psi, sol.phi_raw)
        except SingularConfiguration:
            ratio = math.nan
        rows.append((theta, sol.phi, ratio))
        tracker.update(theta, sol.phi)
    return rows


def parallelogram(crank: float = 0.045, ground: float = DEFAULT_STANDOFF_M,
                  branch: str = "open") -> FourBarGeometry:
    """Identity-transmitting stage: a = c = crank, b = g = ground."""
    return FourBarGeometry(ground=ground, input_link=crank, coupler=ground,
                           output_link=crank, branch=branch)


# -----------------------------------------------------------------------------
# coupling stages
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingStage:
    kind: str
    source: str            # exoskeleton joint id
    target: str            # hand joint id
    geometry: FourBarGeometry | None = None
    parent: str | None = None  # source id of the stage-1 four-bar (chained only)

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise InvalidGeometry(f"unknown stage kind {self.kind!r}")
        if self.kind != "coaxial" and self.geometry is None:
            raise InvalidGeometry(f"stage {self.source}->{self.target} needs geometry")
        if self.kind == "chained-four-bar-stage2" and self.parent is None:
            raise InvalidGeometry(
                f"chained stage {self.source}->{self.target} needs a parent stage")


@dataclass(frozen=True)
class LinkageModel:
    """Ordered coupling stages per finger plus the shared standoff length."""

    stages: Mapping[str, tuple[CouplingStage, ...]]
    joint_order: tuple[str, ...]   # canonical order shared by exo and hand states
    standoff: float = DEFAULT_STANDOFF_M

    def __post_init__(self):
        object.__setattr__(self, "stages",
                           {k: tuple(v) for k, v in self.stages.items()})
        if self.standoff <= 0:
            raise InvalidGeometry("standoff must be > 0")
        sources = [s.source for group in self.stages.values() for s in group]
        targets = [s.target for group in self.stages.values() for s in group]
        if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
            raise InvalidGeometry("joint map must be a bijection (duplicate mapping)")
        if set(sources) != set(self.joint_order) or set(targets) != set(self.joint_order):
            raise InvalidGeometry("joint map must cover every DoF exactly once")
        for finger, group in self.stages.items():
            seen = {}
            for s in group:
                if s.kind == "chained-four-bar-stage2":
                    parent = seen.get(s.parent)
                    if parent is None or parent.kind != "four-bar":
                        raise InvalidGeometry(
                            f"chained stage {s.source} must follow its stage-1 "
                            f"four-bar in finger {finger!r}")
                    if abs(s.geometry.ground - parent.geometry.coupler) > 1e-9:
                        raise InvalidGeometry(
                            f"chained stage {s.source}: ground length must equal the "
                            f"stage-1 coupler length (its physical ground frame)")
                if s.kind != "coaxial":
                    s.geometry.validate_assemblable(0.0)
                seen[s.source] = s
            if finger == "thumb":
                for s in group:
                    if s.target.endswith("tm_abduction") and s.kind != "coaxial":
                        raise InvalidGeometry("thumb abduction stage must be coaxial")

    @property
    def dof(self) -> int:
        return len(self.joint_order)


class LinkageContext:
    """Caller-owned branch-continuity state for consecutive exo_to_hand calls.

    One context per sweep; concurrent sweeps need separate contexts.
    """

    def __init__(self):
        self.trackers: dict[tuple[str, int], BranchTracker] = {}

    @property
    def fresh(self) -> bool:
        return not self.trackers


def default_linkage(model: HandModel, standoff: float = DEFAULT_STANDOFF_M,
                    stage2_crank: float = DEFAULT_STAGE2_CRANK_M) -> LinkageModel:
    """Parallelogram (identity) coupling mirroring the hand's kinematic chain.

    Abduction DoF couple coaxially; each flexion joint gets a stage-1
    parallelogram whose coupler (= standoff) grounds the chained stage-2
    driving the PIP/IP joint.
    """
    stages: dict[str, tuple[CouplingStage, ...]] = {}
    for f in model.fingers:
        group: list[CouplingStage] = []
        stage1_source = None
        for j in f.joints:
            if j.kind in ("MCP-abduction", "TM-abduction"):
                group.append(CouplingStage(kind="coaxial", source=j.id, target=j.id))
            elif j.kind in ("MCP-flexion", "TM-flexion"):
                geom = parallelogram(crank=f.proximal_len, ground=standoff)
                group.append(CouplingStage(kind="four-bar", source=j.id,
                                           target=j.id, geometry=geom))
                stage1_source = j.id
            else:  # PIP / IP
                geom = FourBarGeometry(ground=standoff, input_link=stage2_crank,
                                       coupler=standoff, output_link=stage2_crank)
                group.append(CouplingStage(kind="chained-four-bar-stage2",
                                           source=j.id, target=j.id,
                                           geometry=geom, parent=stage1_source))
        stages[f.name] = tuple(group)
    return LinkageModel(stages=stages, joint_order=model.joint_ids, standoff=standoff)


# Assembly tracking step bound: sub-steps of the exo state used to continue
# each stage's branch from the reference pose. Small enough that no stage
# output moves more than the continuity threshold per step at sane ratios.
_TRACK_STEP_RAD = 0.1


def _coupling_pass(linkage: LinkageModel, q: np.ndarray,
                   context: LinkageContext) -> np.ndarray:
    index = {jid: i for i, jid in enumerate(linkage.joint_order)}
    out = np.zeros(linkage.dof)
    for finger, group in linkage.stages.items():
        solutions: dict[str, FourBarSolution] = {}
        for si, stage in enumerate(group):
            q_in = q[index[stage.source]]
            if stage.kind == "coaxial":
                out[index[stage.target]] = q_in
                continue
            tracker = context.trackers.setdefault((finger, si), BranchTracker())
            if stage.kind == "four-bar":
                theta_local = q_in
            else:  # chained-four-bar-stage2: angles live in the coupler frame
                parent = solutions[stage.parent]
                theta_local = (parent.psi + q_in) - parent.coupler_angle
            try:
                sol = solve_fourbar_full(stage.geometry, theta_local,
                                         branch_hint=tracker.hint(stage.geometry,
                                                                  theta_local))
            except NotAssemblable as e:
                raise NotAssemblable(f"stage {stage.source}: {e}") from None
            tracker.update(theta_local, sol.phi)
            if stage.kind == "four-bar":
                solutions[stage.source] = sol
                out[index[stage.target]] = sol.phi
            else:
                out[index[stage.target]] = (sol.phi + parent.coupler_angle
                                            - parent.phi_raw)
    return out


def exo_to_hand(linkage: LinkageModel, exo_state: JointState,
                context: LinkageContext | None = None) -> JointState:
    """Map exoskeleton joint angles to passive-hand joint angles, stage by stage.

    Branch selection is continuous with the previous call when a context is
    supplied. A fresh context (or none) is first initialized by tracking the
    assembly from the reference pose (all exo joints at zero, where every
    stage is validated assemblable on its declared branch) to the commanded
    state in bounded sub-steps; a binary branch label alone cannot follow an
    assembly through change points.
    """
    q = np.asarray(exo_state.angles, dtype=float)
    if q.shape != (linkage.dof,):
        raise DimensionMismatch(
            f"exo state has {q.shape} angles, linkage couples {linkage.dof} DoF")
    ctx = context if context is not None else LinkageContext()
    if ctx.fresh:
        n = max(1, int(np.ceil(np.abs(q).max() / _TRACK_STEP_RAD))) if q.size else 1
        for s in range(n):  # reference pose first, then intermediate states
            _coupling_pass(linkage, q * (s / n), ctx)
    out = _coupling_pass(linkage, q, ctx)
    return JointState(angles=out, timestamp_ns=exo_state.timestamp_ns)
