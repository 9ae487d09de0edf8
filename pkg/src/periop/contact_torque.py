"""Joint-torque recovery from per-phalanx contact forces via the Jacobian
transpose, plus the observability diagnostics for unobserved contacts.

Forces are given in the palm frame; torques come back in the model's
canonical joint order. Contacts are point forces (no contact moments).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ForceLimitExceeded, SingularConfiguration
from .hand_model import (
    Contact,
    HandModel,
    JointState,
    contact_jacobian,
    fingertip_contact,
    _as_readonly,
)

# Peak fingertip force the hardware sustains (thumb); used as the sensor ceiling.
DEFAULT_FORCE_CEILING_N = 70.0

# Singular values below RANK_RTOL * sigma_max count as zero.
RANK_RTOL = 1e-9


@dataclass(frozen=True)
class ContactWrench:
    """A point force applied to a phalanx, expressed in the palm frame."""

    finger: str
    phalanx: str
    point: np.ndarray     # contact point in the phalanx frame, meters
    force: np.ndarray     # Newtons, palm frame
    force_ceiling: float = DEFAULT_FORCE_CEILING_N

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        force = np.asarray(self.force, dtype=float)
        if point.shape != (3,) or force.shape != (3,):
            raise ValueError("point and force must be 3-vectors")
        if not (np.all(np.isfinite(point)) and np.all(np.isfinite(force))):
            raise ValueError("contact components must be finite")
        mag = float(np.linalg.norm(force))
        if mag > self.force_ceiling:
            raise ForceLimitExceeded(
                f"|F| = {mag:.3g} N exceeds sensor ceiling {self.force_ceiling} N")
        object.__setattr__(self, "point", _as_readonly(point))
        object.__setattr__(self, "force", _as_readonly(force))

    @property
    def contact(self) -> Contact:
        return Contact(finger=self.finger, phalanx=self.phalanx, point=self.point)


@dataclass(frozen=True)
class TorqueEstimate:
    torques: np.ndarray
    jacobian_rank: int
    nullspace_dim: int

    def __post_init__(self):
        object.__setattr__(self, "torques", _as_readonly(self.torques))


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    nullspace_dim: int
    basis: np.ndarray  # DoF x nullspace_dim, orthonormal unidentifiable directions


def _stack_jacobian(model: HandModel, state: JointState,
                    contacts: Sequence[Contact | ContactWrench]) -> np.ndarray:
    blocks = []
    for c in contacts:
        contact = c.contact if isinstance(c, ContactWrench) else c
        blocks.append(contact_jacobian(model, state, contact))
    if not blocks:
        return np.zeros((0, model.dof))
    return np.vstack(blocks)


def _rank_and_nullspace(stacked: np.ndarray, dof: int) -> tuple[int, np.ndarray]:
    if stacked.shape[0] == 0:
        return 0, np.eye(dof)
    _, s, vt = np.linalg.svd(stacked)
    if s.size == 0 or s[0] == 0.0:
        return 0, np.eye(dof)
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    return rank, vt[rank:].T


def joint_torques(model: HandModel, state: JointState,
                  contacts: Sequence[ContactWrench]) -> TorqueEstimate:
    """tau = sum_c J_c(q)^T F_c over all hand joints.

    Linear in the contact forces; a contact contributes zero torque to joints
    distal to its phalanx.
    """
    palm_r = model.palm.rotation
    tau = np.zeros(model.dof)
    for c in contacts:
        jac = contact_jacobian(model, state, c.contact)
        tau += jac.T @ (palm_r @ c.force)
    stacked = _stack_jacobian(model, state, contacts)
    rank, null = _rank_and_nullspace(stacked, model.dof)
    return TorqueEstimate(torques=tau, jacobian_rank=rank,
                          nullspace_dim=null.shape[1])


def observability(model: HandModel, state: JointState,
                  observed_contacts: Sequence[Contact | ContactWrench]) -> ObservabilityReport:
    """Rank of the stacked observed-contact Jacobian and an orthonormal basis
    of the torque directions no observed contact can explain."""
    stacked = _stack_jacobian(model, state, observed_contacts)
    rank, null = _rank_and_nullspace(stacked, model.dof)
    return ObservabilityReport(rank=rank, nullspace_dim=null.shape[1], basis=null)


def estimate_fingertip_force(model: HandModel, state: JointState,
                             torques: np.ndarray, finger: str,
                             ridge: float = 1e-8) -> tuple[np.ndarray, float]:
    """Least-squares fingertip force explaining the finger's joint torques.

    Minimizes ||J_tip^T F - tau_finger||^2 + ridge * ||F||^2 over F in the
    palm frame. Returns (F_hat, residual norm). With ridge = 0 a rank-deficient
    fingertip Jacobian raises SingularConfiguration.
    """
    torques = np.asarray(torques, dtype=float)
    idx = list(model.finger_joint_indices(finger))
    tau_f = torques[idx]
    jac = contact_jacobian(model, state, fingertip_contact(model, finger))
    j_f = jac[:, idx]                      # 3 x k
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge == 0.0:
        if np.linalg.matrix_rank(j_f, tol=RANK_RTOL * max(1.0, float(np.linalg.norm(j_f)))) < 3:
            raise SingularConfiguration(
                f"fingertip Jacobian of {finger!r} is rank-deficient; use ridge > 0")
        f_hat, *_ = np.linalg.lstsq(j_f.T, tau_f, rcond=None)
    else:
        f_hat = np.linalg.solve(j_f @ j_f.T + ridge * np.eye(3), j_f @ tau_f)
    residual = float(np.linalg.norm(j_f.T @ f_hat - tau_f))
    return f_hat, residual
