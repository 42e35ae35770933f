"""Affine linearized plant of the hand-object system around an operating point.

For x = (x_o, xdot_o) and object-level input u (the wrench demanded from the
grasp, mapped to torques with the estimated grasp map) the model is

    xdot ~= A (x - x*) + B u + V

with A = [[0, I], [A21, A22]], B = [0; M^-1 G_w Ghat_w^+] and V collecting
the drift at the operating point and its offset from the equilibrium.
Partial derivatives of M^-1, C and W are taken by central differences.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.errors import DimensionError
from src.model.dynamics import coupled_terms, nonlinear_derivative
from src.model.kinematics import grasp_map_world, grasp_pseudo_inverse, hand_jacobian, inverse_kinematics
from src.model.params import HandObjectParams

logger = logging.getLogger(__name__)

FD_RELATIVE_STEP = 1e-6
N_X, N_U = 6, 3


def decision_variable_count(n_x: int = N_X, n_u: int = N_U) -> int:
    """Free entries of a symmetric P (n_x x n_x) plus Y (n_u x n_x)."""
    return n_x * (n_x + 1) // 2 + n_u * n_x


@dataclass(frozen=True)
class OperatingPoint:
    x_o: np.ndarray
    xd_o: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    delta: float
    delta_hat: float = 0.0
    x_eq: Optional[np.ndarray] = None
    tau_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        for name, size in (("x_o", 3), ("xd_o", 3), ("q", 4), ("tau", 4)):
            value = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if value.shape != (size,) or not np.all(np.isfinite(value)):
                raise DimensionError(f"operating point field {name} must be {size} finite values")
            object.__setattr__(self, name, value)
        x_eq = self.state if self.x_eq is None else np.asarray(self.x_eq, dtype=float).reshape(-1)
        tau_eq = self.tau if self.tau_eq is None else np.asarray(self.tau_eq, dtype=float).reshape(-1)
        if x_eq.shape != (6,) or tau_eq.shape != (4,):
            raise DimensionError("x_eq must have 6 entries and tau_eq 4")
        object.__setattr__(self, "x_eq", x_eq)
        object.__setattr__(self, "tau_eq", tau_eq)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.x_o, self.xd_o])

    @classmethod
    def from_pose(
        cls,
        x_o,
        delta: float,
        params: HandObjectParams,
        xd_o=None,
        tau=None,
        delta_hat: float = 0.0,
        x_eq=None,
        tau_eq=None,
    ) -> "OperatingPoint":
        """Operating point whose joints are reconstructed by inverse kinematics."""
        x_o = np.asarray(x_o, dtype=float)
        q = inverse_kinematics(x_o, delta, params).q
        return cls(
            x_o=x_o,
            xd_o=np.zeros(3) if xd_o is None else xd_o,
            q=q,
            tau=np.zeros(4) if tau is None else tau,
            delta=delta,
            delta_hat=delta_hat,
            x_eq=x_eq,
            tau_eq=tau_eq,
        )


@dataclass(frozen=True)
class AffinePlant:
    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    B_tau: Optional[np.ndarray] = field(default=None, repr=False)

    def closed_loop(self, gain: np.ndarray) -> np.ndarray:
        return self.A - self.B @ gain


@dataclass(frozen=True)
class AugmentedPlant:
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class _FieldTerms:
    Minv: np.ndarray
    C: np.ndarray
    W: np.ndarray
    M: np.ndarray
    Gw: np.ndarray


class _ObjectField:
    """Object-level model with joints propagated to first order around q*."""

    def __init__(self, op: OperatingPoint, params: HandObjectParams):
        self.op = op
        self.params = params
        J = hand_jacobian(op.q, op.x_o, params)
        self.joint_map = np.linalg.solve(J, grasp_map_world(op.x_o, op.delta, params).T)

    def terms(self, x_o: np.ndarray, xd_o: np.ndarray) -> _FieldTerms:
        q = self.op.q + self.joint_map @ (x_o - self.op.x_o)
        J = hand_jacobian(q, x_o, self.params)
        Gw = grasp_map_world(x_o, self.op.delta, self.params)
        qd = np.linalg.solve(J, Gw.T @ xd_o)
        t = coupled_terms(q, x_o, qd, xd_o, self.op.delta, self.params)
        return _FieldTerms(Minv=np.linalg.inv(t.M), C=t.C, W=t.W, M=t.M, Gw=Gw)


def _central_difference(fn: Callable[[np.ndarray], np.ndarray], point: np.ndarray, rel_step: float) -> list:
    """Partial derivatives of a matrix-valued fn, one entry per coordinate of ``point``."""
    partials = []
    for j in range(point.size):
        h = rel_step * max(abs(point[j]), 1.0)
        e = np.zeros_like(point)
        e[j] = h
        partials.append((fn(point + e) - fn(point - e)) / (2.0 * h))
    return partials


def linearize(op: OperatingPoint, params: HandObjectParams, rel_step: float = FD_RELATIVE_STEP) -> AffinePlant:
    model = _ObjectField(op, params)
    base = model.terms(op.x_o, op.xd_o)
    xd, tau = op.xd_o, op.tau

    d_minv = _central_difference(lambda p: model.terms(p, xd).Minv, op.x_o, rel_step)
    d_c_pos = _central_difference(lambda p: model.terms(p, xd).C, op.x_o, rel_step)
    d_w = _central_difference(lambda p: model.terms(p, xd).W, op.x_o, rel_step)
    d_c_vel = _central_difference(lambda v: model.terms(op.x_o, v).C, xd, rel_step)

    drift = base.W @ tau - base.C @ xd
    A21 = np.column_stack(
        [d_minv[j] @ drift + base.Minv @ (d_w[j] @ tau - d_c_pos[j] @ xd) for j in range(3)]
    )
    A22 = -base.Minv @ (base.C + np.column_stack([d_c_vel[j] @ xd for j in range(3)]))

    A = np.zeros((N_X, N_X))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = A21
    A[3:, 3:] = A22

    G_hat = grasp_map_world(op.x_o, op.delta_hat, params)
    B = np.zeros((N_X, N_U))
    B[3:, :] = base.Minv @ base.Gw @ grasp_pseudo_inverse(G_hat)
    B_tau = np.zeros((N_X, 4))
    B_tau[3:, :] = base.Minv @ base.W

    kappa = np.concatenate([xd, base.Minv @ drift])
    V = kappa + A @ (op.x_eq - op.state) + B_tau @ (op.tau_eq - tau)
    logger.debug("linearized at x_o=%s delta=%.4g", np.round(op.x_o, 5), op.delta)
    return AffinePlant(A=A, B=B, V=V, B_tau=B_tau)


def augment(plant: AffinePlant) -> AugmentedPlant:
    n, m = plant.B.shape
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = plant.A
    A[:n, n] = plant.V
    B = np.zeros((n + 1, m))
    B[:n, :] = plant.B
    return AugmentedPlant(A=A, B=B)


def _perturbation_direction() -> np.ndarray:
    d = np.array([1.0, -0.5, 0.8, 0.3, -0.7, 0.6])
    return d / np.linalg.norm(d)


def linearization_residual(
    plant: AffinePlant, op: OperatingPoint, h: float, params: HandObjectParams, direction: Optional[np.ndarray] = None
) -> float:
    """Error of the affine vector field against the nonlinear one at x* + h*direction."""
    d = _perturbation_direction() if direction is None else np.asarray(direction, dtype=float)
    f0 = nonlinear_derivative(op.state, op.tau, op.delta, params)
    f = nonlinear_derivative(op.state + h * d, op.tau, op.delta, params)
    return float(np.linalg.norm(f - (f0 + plant.A @ (h * d))))


def validate_linearization(
    plant: AffinePlant,
    op: OperatingPoint,
    perturbation_scale: float,
    params: HandObjectParams,
    direction: Optional[np.ndarray] = None,
) -> float:
    """Ratio of affine-model errors at scales h and h/2; about 4 for a correct plant."""
    coarse = linearization_residual(plant, op, perturbation_scale, params, direction)
    fine = linearization_residual(plant, op, 0.5 * perturbation_scale, params, direction)
    if fine == 0.0:
        return float("nan") if coarse == 0.0 else float("inf")
    return coarse / fine
