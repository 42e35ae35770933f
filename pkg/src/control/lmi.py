"""D-region pole-placement LMIs for state feedback u = -L x.

With X = A P - B Y the region {Re < -alpha} ∩ {|s| < r} ∩ {damping >= cos(theta)}
is enforced by

    f1 = X + X^T + 2 alpha P
    f2 = [[-r P, X], [X^T, -r P]]
    f3 = [[sin(theta) (X + X^T), cos(theta) (X - X^T)],
          [cos(theta) (X^T - X), sin(theta) (X + X^T)]]

each required <= (gamma - eta) I together with -P, and the gain is L = Y P^-1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh

from src.errors import DimensionError, DomainError, SingularityError
from src.sdp import LmiConstraint, SdpProblem

logger = logging.getLogger(__name__)

STRICTNESS = 1e-9
# admissible gamma range; the default floor -1 normalizes the homogeneous feasibility program
GAMMA_MIN = -1e6
GAMMA_FLOOR = -1.0
GAMMA_CEILING = -1e-9
BLOCK_NAMES = ("decay", "disk", "cone", "lyapunov")


@dataclass(frozen=True)
class DRegion:
    alpha: float = 0.5
    radius: float = 7.0
    theta: float = math.radians(30.0)

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if not self.radius > 0.0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        if not 0.0 < self.theta < 0.5 * math.pi:
            raise DomainError(f"theta must lie in (0, pi/2), got {self.theta}")

    @classmethod
    def from_degrees(cls, alpha: float, radius: float, theta_deg: float) -> "DRegion":
        return cls(alpha=alpha, radius=radius, theta=math.radians(theta_deg))

    @property
    def is_empty(self) -> bool:
        return self.radius <= self.alpha

    @property
    def min_damping(self) -> float:
        return math.cos(self.theta)

    def to_dict(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "radius": self.radius, "theta_deg": math.degrees(self.theta)}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "DRegion":
        return cls.from_degrees(data["alpha"], data["radius"], data["theta_deg"])


@dataclass(frozen=True)
class DecisionVars:
    P: np.ndarray
    Y: np.ndarray
    gamma: float

    def scaled(self, c: float) -> "DecisionVars":
        return DecisionVars(P=c * self.P, Y=c * self.Y, gamma=c * self.gamma)


class DRegionBlocks(NamedTuple):
    decay: np.ndarray
    disk: np.ndarray
    cone: np.ndarray
    lyapunov: np.ndarray


def _check_dimensions(A: np.ndarray, B: np.ndarray, P: np.ndarray, Y: np.ndarray) -> None:
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {B.shape}")
    if P.shape != (n, n):
        raise DimensionError(f"P must be {n}x{n}, got {P.shape}")
    if Y.shape != (B.shape[1], n):
        raise DimensionError(f"Y must be {B.shape[1]}x{n}, got {Y.shape}")


def build_dregion_blocks(A: np.ndarray, B: np.ndarray, region: DRegion, vars: DecisionVars) -> DRegionBlocks:
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    P, Y = np.atleast_2d(vars.P), np.atleast_2d(vars.Y)
    _check_dimensions(A, B, P, Y)
    X = A @ P - B @ Y
    sym, skew = X + X.T, X - X.T
    s, c = math.sin(region.theta), math.cos(region.theta)
    return DRegionBlocks(
        decay=sym + 2.0 * region.alpha * P,
        disk=np.block([[-region.radius * P, X], [X.T, -region.radius * P]]),
        cone=np.block([[s * sym, c * skew], [-c * skew, s * sym]]),
        lyapunov=-P,
    )


def evaluate_constraint(vars: DecisionVars, A: np.ndarray, B: np.ndarray, region: DRegion) -> np.ndarray:
    """Largest eigenvalue of f_k - gamma I for each block; all <= 0 means feasible."""
    blocks = build_dregion_blocks(A, B, region, vars)
    return np.array([eigvalsh(0.5 * (f + f.T))[-1] - vars.gamma for f in blocks])


def recover_gain(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    P, Y = np.atleast_2d(P), np.atleast_2d(Y)
    if P.shape[0] != P.shape[1] or Y.shape[1] != P.shape[0]:
        raise DimensionError(f"incompatible P {P.shape} and Y {Y.shape}")
    min_eig = eigvalsh(0.5 * (P + P.T))[0]
    if min_eig <= 1e-10:
        raise SingularityError(f"P is not positive definite (min eigenvalue {min_eig:.3g})")
    return np.linalg.solve(P, Y.T).T


def pole_region_margins(poles: np.ndarray, region: DRegion) -> np.ndarray:
    """Per-pole margins (half-plane, disk, cone), negative inside the region.

    The cone margin is |Im| cos(theta) + Re sin(theta), i.e. |Im| < tan(theta) |Re|
    on the left half-plane, which is damping >= cos(theta).
    """
    poles = np.atleast_1d(np.asarray(poles, dtype=complex))
    re, im = poles.real, np.abs(poles.imag)
    return np.column_stack(
        [
            re + region.alpha,
            np.abs(poles) - region.radius,
            im * math.cos(region.theta) + re * math.sin(region.theta),
        ]
    )


def pole_region_check(A_cl: np.ndarray, region: DRegion) -> Tuple[bool, np.ndarray]:
    A_cl = np.atleast_2d(A_cl)
    if A_cl.shape[0] != A_cl.shape[1]:
        raise DimensionError(f"closed-loop matrix must be square, got {A_cl.shape}")
    margins = pole_region_margins(np.linalg.eigvals(A_cl), region)
    return bool(np.all(margins < 0.0)), margins


# ----------------------------
# SCP assembly
# ----------------------------
class VariableLayout:
    """Vectorization of (P, Y, gamma): upper triangle of P row by row, Y row-major, gamma last."""

    def __init__(self, n_x: int, n_u: int):
        self.n_x, self.n_u = n_x, n_u
        self.sym_index = [(i, j) for i in range(n_x) for j in range(i, n_x)]
        self.n_sym = len(self.sym_index)
        self.n_y = n_u * n_x
        self.gamma_index = self.n_sym + self.n_y

    @property
    def size(self) -> int:
        return self.gamma_index + 1

    @property
    def decision_variables(self) -> int:
        return self.n_sym + self.n_y

    def basis(self, k: int) -> DecisionVars:
        P = np.zeros((self.n_x, self.n_x))
        Y = np.zeros((self.n_u, self.n_x))
        if k < self.n_sym:
            i, j = self.sym_index[k]
            P[i, j] = P[j, i] = 1.0
        elif k < self.gamma_index:
            Y.flat[k - self.n_sym] = 1.0
        return DecisionVars(P=P, Y=Y, gamma=0.0)

    def unpack(self, x: np.ndarray) -> DecisionVars:
        P = np.zeros((self.n_x, self.n_x))
        for k, (i, j) in enumerate(self.sym_index):
            P[i, j] = P[j, i] = x[k]
        Y = np.asarray(x[self.n_sym:self.gamma_index]).reshape(self.n_u, self.n_x)
        return DecisionVars(P=P, Y=Y, gamma=float(x[self.gamma_index]))

    def names(self) -> List[str]:
        return (
            [f"P[{i},{j}]" for i, j in self.sym_index]
            + [f"Y[{i},{j}]" for i in range(self.n_u) for j in range(self.n_x)]
            + ["gamma"]
        )


def _linear_block(layout: VariableLayout, fn, offset: float, name: str) -> LmiConstraint:
    """Constraint fn(P, Y) - gamma I + offset I <= 0 for a linear matrix function fn."""
    columns = [fn(layout.basis(k)) for k in range(layout.gamma_index)]
    d = columns[0].shape[0]
    columns.append(-np.eye(d))
    F = sp.csc_matrix(np.column_stack([c.reshape(-1, order="F") for c in columns]))
    return LmiConstraint(F0=offset * np.eye(d), F=F, name=name)


@dataclass
class ScpOptions:
    eta: float = STRICTNESS
    gamma_floor: float = GAMMA_FLOOR
    gamma_ceiling: float = GAMMA_CEILING
    tightening: float = 0.0
    mu: Optional[float] = None


def design_lmi_problem(
    plants: Sequence[Tuple[np.ndarray, np.ndarray]], region: DRegion, options: Optional[ScpOptions] = None
) -> Tuple[SdpProblem, VariableLayout]:
    """One shared (P, Y, gamma) for every (A, B) pair; minimize gamma."""
    options = options or ScpOptions()
    if not plants:
        raise DimensionError("at least one plant is required")
    if not GAMMA_MIN <= options.gamma_floor < options.gamma_ceiling <= GAMMA_CEILING:
        raise DomainError(
            f"gamma bounds must satisfy {GAMMA_MIN:g} <= floor < ceiling <= {GAMMA_CEILING:g}, "
            f"got [{options.gamma_floor:g}, {options.gamma_ceiling:g}]"
        )
    n_x, n_u = np.atleast_2d(plants[0][1]).shape
    layout = VariableLayout(n_x, n_u)
    offset = options.eta + options.tightening
    zero = DecisionVars(P=np.zeros((n_x, n_x)), Y=np.zeros((n_u, n_x)), gamma=0.0)

    constraints = [_linear_block(layout, lambda v: -v.P, offset, "lyapunov")]
    for idx, (A, B) in enumerate(plants):
        A, B = np.atleast_2d(A), np.atleast_2d(B)
        build_dregion_blocks(A, B, region, zero)
        for k, name in enumerate(BLOCK_NAMES[:3]):
            fn = lambda v, k=k: build_dregion_blocks(A, B, region, v)[k]
            constraints.append(_linear_block(layout, fn, offset, f"{name}[{idx}]"))

    if options.mu is not None:
        mu = options.mu
        n = layout.gamma_index
        p_cols = [layout.basis(k).P for k in range(n)] + [np.zeros((n_x, n_x))]
        constraints.append(LmiConstraint.from_dense(-mu * np.eye(n_x), p_cols, name="P_upper"))
        constraints.append(LmiConstraint.from_dense(np.zeros((n_x, n_x)), [-c for c in p_cols], name="P_lower"))
        d = n_u + n_x
        y_cols = []
        for k in range(n):
            Y = layout.basis(k).Y
            block = np.zeros((d, d))
            block[:n_u, n_u:] = Y
            block[n_u:, :n_u] = Y.T
            y_cols.append(block)
        y_cols.append(np.zeros((d, d)))
        constraints.append(LmiConstraint.from_dense(-mu * np.eye(d), y_cols, name="Y_norm"))

    c = np.zeros(layout.size)
    c[layout.gamma_index] = 1.0
    lb = np.full(layout.size, -np.inf)
    ub = np.full(layout.size, np.inf)
    lb[layout.gamma_index] = options.gamma_floor
    ub[layout.gamma_index] = options.gamma_ceiling
    problem = SdpProblem(c=c, constraints=constraints, lb=lb, ub=ub, variable_names=layout.names())
    return problem, layout


@dataclass
class Controller:
    """Static state-feedback gain with the LMI certificate it came from."""

    gain: np.ndarray
    P: np.ndarray
    Y: np.ndarray
    gamma: float
    region: DRegion
    designer: str = "feasibility"
    seed: Optional[int] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_vars(cls, vars: DecisionVars, region: DRegion, **kwargs) -> "Controller":
        return cls(gain=recover_gain(vars.P, vars.Y), P=vars.P, Y=vars.Y, gamma=vars.gamma, region=region, **kwargs)

    @property
    def vars(self) -> DecisionVars:
        return DecisionVars(P=self.P, Y=self.Y, gamma=self.gamma)

    def flipped(self) -> "Controller":
        """Sign-inverted gain (and Y), a deliberately destabilizing controller."""
        return Controller(
            gain=-self.gain,
            P=self.P,
            Y=-self.Y,
            gamma=self.gamma,
            region=self.region,
            designer=f"{self.designer}-flipped",
            seed=self.seed,
            provenance=dict(self.provenance),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "designer": self.designer,
            "seed": self.seed,
            "region": self.region.to_dict(),
            "gain": self.gain.tolist(),
            "P": self.P.tolist(),
            "Y": self.Y.tolist(),
            "gamma": self.gamma,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Controller":
        return cls(
            gain=np.asarray(data["gain"], dtype=float),
            P=np.asarray(data["P"], dtype=float),
            Y=np.asarray(data["Y"], dtype=float),
            gamma=float(data["gamma"]),
            region=DRegion.from_dict(data["region"]),
            designer=data.get("designer", "feasibility"),
            seed=data.get("seed"),
            provenance=dict(data.get("provenance", {})),
        )
