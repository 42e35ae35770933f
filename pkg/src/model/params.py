from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.errors import DimensionError, DomainError

Pair = Tuple[float, float]


class HandObjectParams(BaseModel):
    """Physical parameters of the two-finger hand and the grasped box, in SI units.

    Finger 1 sits on the right (+x) base and touches the +x face of the
    object; finger 2 sits on the left base and touches the -x face.
    """

    model_config = ConfigDict(frozen=True)

    base_positions: Tuple[Pair, Pair] = ((0.035, 0.0), (-0.035, 0.0))
    link_lengths: Tuple[Pair, Pair] = ((0.045, 0.045), (0.045, 0.045))
    link_masses: Tuple[Pair, Pair] = ((0.05, 0.05), (0.05, 0.05))
    link_inertias: Tuple[Pair, Pair] = ((8.4375e-6, 8.4375e-6), (8.4375e-6, 8.4375e-6))
    object_mass: float = 0.02
    object_inertia: float = 6.0e-6
    half_width: float = 0.0175
    friction_coefficient: float = 0.8
    min_normal_force: float = 0.5
    delta_bounds: Pair = (-0.004, 0.005)
    joint_limits: Pair = (-np.pi, np.pi)
    singularity_threshold: float = 1.0e6

    @field_validator("link_lengths", "link_masses", "link_inertias")
    @classmethod
    def _strictly_positive_pairs(cls, value):
        if any(v <= 0.0 for finger in value for v in finger):
            raise ValueError("link lengths, masses and inertias must be strictly positive")
        return value

    @field_validator("object_mass", "object_inertia", "half_width", "friction_coefficient", "singularity_threshold")
    @classmethod
    def _strictly_positive(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("must be strictly positive")
        return value

    @field_validator("min_normal_force")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("must be non-negative")
        return value

    @model_validator(mode="after")
    def _ordered_intervals(self):
        if self.delta_bounds[0] > self.delta_bounds[1]:
            raise ValueError("delta_bounds must be ordered (lower, upper)")
        if self.joint_limits[0] >= self.joint_limits[1]:
            raise ValueError("joint_limits must be ordered (lower, upper)")
        return self

    def base(self, finger: int) -> np.ndarray:
        return np.asarray(self.base_positions[finger], dtype=float)

    def lengths(self, finger: int) -> np.ndarray:
        return np.asarray(self.link_lengths[finger], dtype=float)

    @property
    def reach(self) -> np.ndarray:
        return np.array([sum(self.link_lengths[0]), sum(self.link_lengths[1])])

    def check_delta(self, delta: float) -> float:
        lo, hi = self.delta_bounds
        tol = 1e-12
        if not np.isfinite(delta) or delta < lo - tol or delta > hi + tol:
            raise DomainError(f"delta={delta:.6g} m outside admissible interval [{lo:.6g}, {hi:.6g}]")
        return float(delta)


def _vector(value, size: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise DimensionError(f"{name} must have {size} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def wrap_angle(angle):
    """Map angles to (-pi, pi]."""
    wrapped = np.arctan2(np.sin(angle), np.cos(angle))
    return np.where(np.isclose(wrapped, -np.pi), np.pi, wrapped)


@dataclass(frozen=True)
class ObjectPose:
    x_o: np.ndarray
    xd_o: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        x_o = _vector(self.x_o, 3, "x_o").copy()
        x_o[2] = float(wrap_angle(x_o[2]))
        object.__setattr__(self, "x_o", x_o)
        object.__setattr__(self, "xd_o", _vector(self.xd_o, 3, "xd_o"))

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.x_o, self.xd_o])


@dataclass(frozen=True)
class JointConfig:
    q: np.ndarray
    qd: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        object.__setattr__(self, "q", _vector(self.q, 4, "q"))
        object.__setattr__(self, "qd", _vector(self.qd, 4, "qd"))

    def finger(self, index: int) -> np.ndarray:
        return self.q[2 * index:2 * index + 2]

    def within_limits(self, params: HandObjectParams) -> bool:
        lo, hi = params.joint_limits
        return bool(np.all(self.q >= lo) and np.all(self.q <= hi))


@dataclass(frozen=True)
class GraspMap:
    G: np.ndarray
    delta: float


@dataclass(frozen=True)
class ObjectLevelDynamics:
    M: np.ndarray
    C: np.ndarray
    N: np.ndarray
