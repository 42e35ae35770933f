"""Planar kinematics of the two-finger hand and the object-attached contact frames.

Contact 1 is the body point (r0, 0) on the +x face, contact 2 is (-r0, -delta)
on the -x face. Contact force components are ordered (tangential, normal)
per contact with normals pointing into the object, which gives the grasp map

    G(delta) = [[0, -1,  0, 1],
                [1,  0, -1, 0],
                [r0, 0, r0, delta]]

in object coordinates. The world-frame map rotates the force rows by R(theta).
"""

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import block_diag, null_space

from src.errors import DimensionError, SingularityError, UnreachableError
from src.model.params import GraspMap, HandObjectParams, JointConfig, wrap_angle

logger = logging.getLogger(__name__)

SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])
# rows project a world vector on (tangent, inward normal) of each contact, in body axes
CONTACT_AXES = (np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[0.0, -1.0], [1.0, 0.0]]))
# finger 1 elbow-out to the right (q2 > 0), finger 2 elbow-out to the left (q4 < 0)
ELBOW_SIGNS = (1.0, -1.0)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def wrench_rotation(theta: float) -> np.ndarray:
    return block_diag(rotation(theta), 1.0)


def grasp_map(delta: float, params: HandObjectParams) -> GraspMap:
    delta = params.check_delta(delta)
    r0 = params.half_width
    G = np.array(
        [
            [0.0, -1.0, 0.0, 1.0],
            [1.0, 0.0, -1.0, 0.0],
            [r0, 0.0, r0, delta],
        ]
    )
    return GraspMap(G=G, delta=delta)


def grasp_map_world(x_o: np.ndarray, delta: float, params: HandObjectParams) -> np.ndarray:
    return wrench_rotation(x_o[2]) @ grasp_map(delta, params).G


def grasp_map_world_rate(x_o: np.ndarray, xd_o: np.ndarray, delta: float, params: HandObjectParams) -> np.ndarray:
    dR = rotation(x_o[2]) @ SKEW * xd_o[2]
    return block_diag(dR, 0.0) @ grasp_map(delta, params).G


def grasp_pseudo_inverse(G: np.ndarray) -> np.ndarray:
    """Right inverse G^T (G G^T)^-1 of a full-row-rank grasp map."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    s = np.linalg.svd(G, compute_uv=False)
    tol = max(G.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < G.shape[0]:
        raise SingularityError(f"grasp map has rank {rank} < {G.shape[0]} rows")
    return G.T @ np.linalg.inv(G @ G.T)


def grasp_nullspace(G: np.ndarray) -> np.ndarray:
    """Unit-norm basis of ker(G), signed so that it squeezes (positive normal sum)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    basis = null_space(G)
    if basis.shape[1] != 1:
        raise SingularityError(f"expected a one-dimensional grasp kernel, got dimension {basis.shape[1]}")
    n = basis[:, 0]
    if G.shape[1] == 4 and n[1] + n[3] < 0.0:
        n = -n
    return n / np.linalg.norm(n)


def contact_points(x_o: np.ndarray, delta: float, params: HandObjectParams) -> np.ndarray:
    """World positions of both contacts, shape (2, 2)."""
    r0 = params.half_width
    body = np.array([[r0, 0.0], [-r0, -delta]])
    return np.asarray(x_o[:2]) + body @ rotation(x_o[2]).T


def finger_tip(q_finger: np.ndarray, base: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    q1, q2 = q_finger
    l1, l2 = lengths
    return base + np.array(
        [l1 * np.cos(q1) + l2 * np.cos(q1 + q2), l1 * np.sin(q1) + l2 * np.sin(q1 + q2)]
    )


def forward_kinematics(q: np.ndarray, params: HandObjectParams) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise DimensionError(f"q must have 4 entries, got {q.shape}")
    return np.vstack([finger_tip(q[2 * i:2 * i + 2], params.base(i), params.lengths(i)) for i in range(2)])


def finger_jacobian(q_finger: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    q1, q2 = q_finger
    l1, l2 = lengths
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    return np.array([[-l1 * s1 - l2 * s12, -l2 * s12], [l1 * c1 + l2 * c12, l2 * c12]])


def finger_jacobian_rate(q_finger: np.ndarray, qd_finger: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    q1, q2 = q_finger
    w1, w2 = qd_finger
    l1, l2 = lengths
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    w12 = w1 + w2
    return np.array(
        [
            [-l1 * c1 * w1 - l2 * c12 * w12, -l2 * c12 * w12],
            [-l1 * s1 * w1 - l2 * s12 * w12, -l2 * s12 * w12],
        ]
    )


def hand_jacobian(q: np.ndarray, x_o: np.ndarray, params: HandObjectParams, check: bool = True) -> np.ndarray:
    """Map joint rates to contact-frame (tangential, normal) velocities of both fingertips."""
    Rt = rotation(x_o[2]).T
    blocks = [CONTACT_AXES[i] @ Rt @ finger_jacobian(q[2 * i:2 * i + 2], params.lengths(i)) for i in range(2)]
    J = block_diag(*blocks)
    if check:
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > params.singularity_threshold:
            raise SingularityError(f"hand Jacobian is singular (condition number {cond:.3g})")
    return J


def hand_jacobian_rate(
    q: np.ndarray, qd: np.ndarray, x_o: np.ndarray, xd_o: np.ndarray, params: HandObjectParams
) -> np.ndarray:
    R = rotation(x_o[2])
    dRt = -xd_o[2] * SKEW @ R.T
    blocks = []
    for i in range(2):
        qi, qdi = q[2 * i:2 * i + 2], qd[2 * i:2 * i + 2]
        Jf = finger_jacobian(qi, params.lengths(i))
        dJf = finger_jacobian_rate(qi, qdi, params.lengths(i))
        blocks.append(CONTACT_AXES[i] @ (dRt @ Jf + R.T @ dJf))
    return block_diag(*blocks)


def finger_inverse_kinematics(target: np.ndarray, finger: int, params: HandObjectParams) -> np.ndarray:
    base, (l1, l2) = params.base(finger), params.lengths(finger)
    d = np.asarray(target, dtype=float) - base
    dist = float(np.hypot(d[0], d[1]))
    tol = 1e-12
    if dist > l1 + l2 + tol or dist < abs(l1 - l2) - tol:
        raise UnreachableError(
            f"finger {finger + 1}: target at distance {dist * 1e3:.3f} mm outside reach "
            f"[{abs(l1 - l2) * 1e3:.3f}, {(l1 + l2) * 1e3:.3f}] mm"
        )
    c2 = np.clip((dist**2 - l1**2 - l2**2) / (2.0 * l1 * l2), -1.0, 1.0)
    q2 = ELBOW_SIGNS[finger] * np.arccos(c2)
    q1 = np.arctan2(d[1], d[0]) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
    return np.array([float(wrap_angle(q1)), q2])


def inverse_kinematics_points(points: np.ndarray, params: HandObjectParams) -> np.ndarray:
    return np.concatenate([finger_inverse_kinematics(points[i], i, params) for i in range(2)])


def inverse_kinematics(x_o: np.ndarray, delta: float, params: HandObjectParams) -> JointConfig:
    """Joint angles placing both fingertips on the contact points of pose ``x_o``."""
    params.check_delta(delta)
    q = inverse_kinematics_points(contact_points(np.asarray(x_o, dtype=float), delta, params), params)
    config = JointConfig(q=q)
    if not config.within_limits(params):
        raise UnreachableError(f"inverse kinematics solution {np.round(q, 4)} violates joint limits")
    return config


def object_to_joint_map(q: np.ndarray, x_o: np.ndarray, delta: float, params: HandObjectParams) -> Tuple[np.ndarray, np.ndarray]:
    """Return (J_h, H) with H = J_h^-1 G_w^T, so that qdot = H xdot_o."""
    J = hand_jacobian(q, x_o, params)
    H = np.linalg.solve(J, grasp_map_world(x_o, delta, params).T)
    return J, H
