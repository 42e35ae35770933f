"""Object-level dynamics of the hand-object system.

Joint rates follow the object through qdot = H xdot_o with H = J_h^-1 G_w^T.
Finger inertia is reflected to the object level as

    M = M_o + H^T M_h H,    C = H^T (M_h Hdot + C_h H),

and the joint torques enter through W = G_w J_h^-T = H^T, giving

    xddot_o = M^-1 (W tau - C xdot_o - N),   N = 0.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from src.errors import DimensionError
from src.model.kinematics import (
    grasp_map_world,
    grasp_map_world_rate,
    hand_jacobian,
    hand_jacobian_rate,
    inverse_kinematics,
)
from src.model.params import HandObjectParams, ObjectLevelDynamics


def finger_mass_matrix(q_finger: np.ndarray, finger: int, params: HandObjectParams) -> np.ndarray:
    (m1, m2), (l1, l2), (i1, i2) = params.link_masses[finger], params.link_lengths[finger], params.link_inertias[finger]
    lc1, lc2 = 0.5 * l1, 0.5 * l2
    c2 = np.cos(q_finger[1])
    m11 = m1 * lc1**2 + i1 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * c2) + i2
    m12 = m2 * (lc2**2 + l1 * lc2 * c2) + i2
    m22 = m2 * lc2**2 + i2
    return np.array([[m11, m12], [m12, m22]])


def finger_coriolis(q_finger: np.ndarray, qd_finger: np.ndarray, finger: int, params: HandObjectParams) -> np.ndarray:
    m2 = params.link_masses[finger][1]
    l1, l2 = params.link_lengths[finger]
    h = -m2 * l1 * 0.5 * l2 * np.sin(q_finger[1])
    w1, w2 = qd_finger
    return np.array([[h * w2, h * (w1 + w2)], [-h * w1, 0.0]])


def hand_mass_matrix(q: np.ndarray, params: HandObjectParams) -> np.ndarray:
    return block_diag(*[finger_mass_matrix(q[2 * i:2 * i + 2], i, params) for i in range(2)])


def hand_coriolis(q: np.ndarray, qd: np.ndarray, params: HandObjectParams) -> np.ndarray:
    return block_diag(*[finger_coriolis(q[2 * i:2 * i + 2], qd[2 * i:2 * i + 2], i, params) for i in range(2)])


def object_mass_matrix(params: HandObjectParams) -> np.ndarray:
    return np.diag([params.object_mass, params.object_mass, params.object_inertia])


@dataclass(frozen=True)
class CoupledTerms:
    """Everything needed to evaluate the object-level model at one state."""

    J: np.ndarray
    H: np.ndarray
    Hd: np.ndarray
    Mh: np.ndarray
    Ch: np.ndarray
    M: np.ndarray
    C: np.ndarray

    @property
    def W(self) -> np.ndarray:
        return self.H.T


def coupled_terms(
    q: np.ndarray, x_o: np.ndarray, qd: np.ndarray, xd_o: np.ndarray, delta: float, params: HandObjectParams
) -> CoupledTerms:
    q, x_o, qd, xd_o = (np.asarray(v, dtype=float) for v in (q, x_o, qd, xd_o))
    if q.shape != (4,) or qd.shape != (4,) or x_o.shape != (3,) or xd_o.shape != (3,):
        raise DimensionError("expected q, qd of length 4 and x_o, xd_o of length 3")
    J = hand_jacobian(q, x_o, params)
    Gw = grasp_map_world(x_o, delta, params)
    H = np.linalg.solve(J, Gw.T)
    Jd = hand_jacobian_rate(q, qd, x_o, xd_o, params)
    Hd = np.linalg.solve(J, grasp_map_world_rate(x_o, xd_o, delta, params).T - Jd @ H)
    Mh = hand_mass_matrix(q, params)
    Ch = hand_coriolis(q, qd, params)
    M = object_mass_matrix(params) + H.T @ Mh @ H
    M = 0.5 * (M + M.T)
    C = H.T @ (Mh @ Hd + Ch @ H)
    return CoupledTerms(J=J, H=H, Hd=Hd, Mh=Mh, Ch=Ch, M=M, C=C)


def dynamics_terms(
    q: np.ndarray, x_o: np.ndarray, qd: np.ndarray, xd_o: np.ndarray, delta: float, params: HandObjectParams
) -> ObjectLevelDynamics:
    terms = coupled_terms(q, x_o, qd, xd_o, delta, params)
    return ObjectLevelDynamics(M=terms.M, C=terms.C, N=np.zeros(3))


def state_terms(x: np.ndarray, delta: float, params: HandObjectParams):
    """Reconstruct (q, qd) from the object state by inverse kinematics and evaluate the model."""
    x = np.asarray(x, dtype=float)
    if x.shape != (6,):
        raise DimensionError(f"state must have 6 entries, got {x.shape}")
    x_o, xd_o = x[:3], x[3:]
    q = inverse_kinematics(x_o, delta, params).q
    J = hand_jacobian(q, x_o, params)
    qd = np.linalg.solve(J, grasp_map_world(x_o, delta, params).T @ xd_o)
    return q, qd, coupled_terms(q, x_o, qd, xd_o, delta, params)


def nonlinear_derivative(x: np.ndarray, tau: np.ndarray, delta: float, params: HandObjectParams) -> np.ndarray:
    _, _, terms = state_terms(x, delta, params)
    xd_o = x[3:]
    xdd_o = np.linalg.solve(terms.M, terms.W @ np.asarray(tau, dtype=float) - terms.C @ xd_o)
    return np.concatenate([xd_o, xdd_o])


def contact_forces(x: np.ndarray, tau: np.ndarray, delta: float, params: HandObjectParams) -> np.ndarray:
    """Contact forces (t1, n1, t2, n2) transmitted by the fingertips for joint torques ``tau``."""
    q, qd, terms = state_terms(x, delta, params)
    tau = np.asarray(tau, dtype=float)
    xd_o = x[3:]
    xdd_o = np.linalg.solve(terms.M, terms.W @ tau - terms.C @ xd_o)
    qdd = terms.H @ xdd_o + terms.Hd @ xd_o
    return np.linalg.solve(terms.J.T, tau - terms.Mh @ qdd - terms.Ch @ qd)


def kinetic_energy(x: np.ndarray, delta: float, params: HandObjectParams) -> float:
    _, _, terms = state_terms(x, delta, params)
    xd_o = np.asarray(x, dtype=float)[3:]
    return float(0.5 * xd_o @ terms.M @ xd_o)
