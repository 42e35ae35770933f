"""Solver-independent representation of linear-objective LMI problems.

    minimize    c^T x
    subject to  F_k0 + sum_i x_i F_ki  <= 0   (negative semidefinite), k = 1..K
                lb <= x <= ub

Each constraint stores its coefficient matrices as one sparse matrix whose
column i is vec(F_ki) in column-major order.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh

from src.errors import DimensionError


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class LmiConstraint:
    F0: np.ndarray
    F: sp.csc_matrix
    name: str = ""

    def __post_init__(self):
        F0 = np.asarray(self.F0, dtype=float)
        if F0.ndim != 2 or F0.shape[0] != F0.shape[1]:
            raise DimensionError(f"constraint {self.name!r}: F0 must be square, got {F0.shape}")
        if not np.allclose(F0, F0.T, atol=1e-12, rtol=0.0):
            raise DimensionError(f"constraint {self.name!r}: F0 must be symmetric")
        F = sp.csc_matrix(self.F)
        if F.shape[0] != F0.size:
            raise DimensionError(f"constraint {self.name!r}: coefficient rows {F.shape[0]} != {F0.size}")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "F", F)

    @classmethod
    def from_dense(cls, F0: np.ndarray, coefficients: Sequence[np.ndarray], name: str = "") -> "LmiConstraint":
        F0 = np.asarray(F0, dtype=float)
        columns = [np.asarray(Fi, dtype=float).reshape(-1, order="F") for Fi in coefficients]
        F = sp.csc_matrix(np.column_stack(columns)) if columns else sp.csc_matrix((F0.size, 0))
        return cls(F0=F0, F=F, name=name)

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    @property
    def n_vars(self) -> int:
        return self.F.shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        E = self.F0 + np.asarray(self.F @ x).reshape(self.F0.shape, order="F")
        return 0.5 * (E + E.T)

    def coefficient(self, i: int) -> np.ndarray:
        return self.F[:, i].toarray().reshape(self.F0.shape, order="F")

    def scaled(self, factor: float) -> "LmiConstraint":
        return LmiConstraint(F0=factor * self.F0, F=factor * self.F, name=self.name)


@dataclass
class SdpProblem:
    c: np.ndarray
    constraints: List[LmiConstraint]
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    variable_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise DimensionError("bounds must match the number of variables")
        for con in self.constraints:
            if con.n_vars != n:
                raise DimensionError(f"constraint {con.name!r} has {con.n_vars} coefficients, expected {n}")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def scaled(self, factor: float) -> "SdpProblem":
        """Same feasible set and argmin, every constraint multiplied by ``factor`` > 0."""
        return SdpProblem(
            c=self.c.copy(),
            constraints=[con.scaled(factor) for con in self.constraints],
            lb=self.lb.copy(),
            ub=self.ub.copy(),
            variable_names=list(self.variable_names),
        )


@dataclass
class SdpSolution:
    x: Optional[np.ndarray]
    objective: float
    status: SdpStatus
    primal_residual: float
    solve_time: float
    iterations: int = 0
    backend: str = ""
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == SdpStatus.OPTIMAL


def max_constraint_eigenvalue(problem: SdpProblem, x: np.ndarray) -> float:
    """Largest eigenvalue over all LMI blocks plus the worst bound violation.

    Uses LAPACK eigvalsh, independently of whatever the backend reports.
    """
    x = np.asarray(x, dtype=float)
    worst = -np.inf
    for con in problem.constraints:
        worst = max(worst, float(eigvalsh(con.evaluate(x))[-1]))
    with np.errstate(invalid="ignore"):
        bound_gap = np.concatenate([problem.lb - x, x - problem.ub])
    bound_gap = bound_gap[np.isfinite(bound_gap)]
    if bound_gap.size:
        worst = max(worst, float(bound_gap.max()))
    return worst


def constraint_scale(problem: SdpProblem, x: np.ndarray) -> float:
    """Magnitude of the constraint matrices at ``x`` used to make tolerances relative."""
    scale = 1.0
    for con in problem.constraints:
        scale = max(scale, float(np.abs(con.evaluate(x)).max()))
    return scale
