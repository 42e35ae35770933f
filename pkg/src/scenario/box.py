import itertools
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.control.linearization import OperatingPoint
from src.errors import DimensionError, DomainError
from src.model.kinematics import inverse_kinematics
from src.model.params import HandObjectParams
from src.scenario.rng import ScenarioRng

logger = logging.getLogger(__name__)

COORDINATES = ("q1", "q2", "q3", "q4", "px", "py", "ptheta", "vx", "vy", "omega", "delta")
JOINTS = slice(0, 4)
POSE = slice(4, 7)
VELOCITY = slice(7, 10)
DELTA = 10


@dataclass(frozen=True)
class UncertaintyBox:
    """Per-coordinate sampling intervals over COORDINATES, SI units.

    Frozen coordinates stay at ``nominal``. When any joint coordinate is free
    the sampled joints are used as linearization parameters in their own
    right; otherwise joints follow the sampled pose by inverse kinematics.
    """

    lower: np.ndarray
    upper: np.ndarray
    nominal: np.ndarray
    free: tuple

    def __post_init__(self):
        n = len(COORDINATES)
        for name in ("lower", "upper", "nominal"):
            value = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if value.shape != (n,):
                raise DimensionError(f"box {name} must have {n} entries")
            object.__setattr__(self, name, value)
        free = tuple(bool(f) for f in self.free)
        if len(free) != n:
            raise DimensionError(f"box free flags must have {n} entries")
        object.__setattr__(self, "free", free)
        if np.any(self.lower > self.upper):
            bad = [COORDINATES[i] for i in np.flatnonzero(self.lower > self.upper)]
            raise DomainError(f"box lower bound above upper bound for {bad}")
        if not any(free):
            raise DomainError("uncertainty box needs at least one free coordinate")

    @property
    def free_mask(self) -> np.ndarray:
        return np.array(self.free)

    @property
    def n_xi(self) -> int:
        return int(sum(self.free))

    @property
    def free_names(self) -> List[str]:
        return [name for name, f in zip(COORDINATES, self.free) if f]

    @property
    def joints_sampled(self) -> bool:
        return any(self.free[JOINTS])

    @property
    def midpoint(self) -> np.ndarray:
        return np.where(self.free_mask, 0.5 * (self.lower + self.upper), self.nominal)

    def contains(self, values: np.ndarray, tol: float = 1e-12) -> bool:
        values = np.asarray(values, dtype=float)
        mask = self.free_mask
        inside = np.all(values[mask] >= self.lower[mask] - tol) and np.all(values[mask] <= self.upper[mask] + tol)
        return bool(inside and np.allclose(values[~mask], self.nominal[~mask]))

    def restricted(self, free: Iterable[str]) -> "UncertaintyBox":
        """Copy of the box with only the named coordinates left free."""
        names = set(free)
        unknown = names - set(COORDINATES)
        if unknown:
            raise DomainError(f"unknown box coordinates {sorted(unknown)}")
        return UncertaintyBox(
            lower=self.lower, upper=self.upper, nominal=self.nominal, free=tuple(n in names for n in COORDINATES)
        )

    def collapsed(self, point: np.ndarray) -> "UncertaintyBox":
        """Zero-width box at ``point`` keeping the same free coordinates."""
        point = np.asarray(point, dtype=float)
        return UncertaintyBox(lower=point, upper=point, nominal=point, free=self.free)

    def to_dict(self) -> Dict[str, Any]:
        return {
            name: {"lower": lo, "upper": hi, "nominal": nom, "free": f}
            for name, lo, hi, nom, f in zip(
                COORDINATES, self.lower.tolist(), self.upper.tolist(), self.nominal.tolist(), self.free
            )
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UncertaintyBox":
        rows = [data[name] for name in COORDINATES]
        return cls(
            lower=np.array([r["lower"] for r in rows]),
            upper=np.array([r["upper"] for r in rows]),
            nominal=np.array([r["nominal"] for r in rows]),
            free=tuple(bool(r["free"]) for r in rows),
        )


@dataclass(frozen=True)
class Scenario:
    index: int
    values: np.ndarray

    @property
    def delta(self) -> float:
        return float(self.values[DELTA])

    def operating_point(
        self, box: UncertaintyBox, params: HandObjectParams, delta_hat: float = 0.0
    ) -> OperatingPoint:
        v = self.values
        x_eq = np.concatenate([box.nominal[POSE], np.zeros(3)])
        if box.joints_sampled:
            return OperatingPoint(
                x_o=v[POSE], xd_o=v[VELOCITY], q=v[JOINTS], tau=np.zeros(4), delta=self.delta,
                delta_hat=delta_hat, x_eq=x_eq, tau_eq=np.zeros(4),
            )
        return OperatingPoint.from_pose(
            v[POSE], self.delta, params, xd_o=v[VELOCITY], delta_hat=delta_hat, x_eq=x_eq, tau_eq=np.zeros(4)
        )


@dataclass
class ScenarioSet:
    scenarios: List[Scenario]
    seed: Optional[int]
    box: UncertaintyBox
    generated_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([s.values for s in self.scenarios])

    def to_dict(self) -> Dict[str, Any]:
        # generation time is kept in memory only so artifacts stay byte-identical
        return {
            "seed": self.seed,
            "count": len(self.scenarios),
            "coordinates": list(COORDINATES),
            "box": self.box.to_dict(),
            "scenarios": [s.values.tolist() for s in self.scenarios],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioSet":
        box = UncertaintyBox.from_dict(data["box"])
        scenarios = [Scenario(index=i, values=np.asarray(v, dtype=float)) for i, v in enumerate(data["scenarios"])]
        return cls(scenarios=scenarios, seed=data.get("seed"), box=box)


def sample_box(box: UncertaintyBox, count: int, generator: np.random.Generator) -> np.ndarray:
    mask = box.free_mask
    values = np.tile(box.nominal, (count, 1))
    u = generator.random((count, int(mask.sum())))
    values[:, mask] = box.lower[mask] + u * (box.upper[mask] - box.lower[mask])
    return values


def draw_scenarios(box: UncertaintyBox, N: int, seed: int, stream: str = "scenarios") -> ScenarioSet:
    """N i.i.d. uniform scenarios over the free coordinates of ``box``."""
    if N < 1:
        raise DomainError(f"N must be at least 1, got {N}")
    values = sample_box(box, N, ScenarioRng(seed).stream(stream))
    logger.info("drew %d scenarios over %d free coordinates (seed=%d)", N, box.n_xi, seed)
    return ScenarioSet(scenarios=[Scenario(index=i, values=v) for i, v in enumerate(values)], seed=seed, box=box)


def delta_grid_scenarios(box: UncertaintyBox, deltas: Sequence[float]) -> ScenarioSet:
    """Deterministic scenarios at the nominal operating point, one per grid value of delta."""
    if len(deltas) == 0:
        raise DomainError("delta grid must not be empty")
    grid_box = box.restricted(["delta"])
    rows = []
    for i, delta in enumerate(deltas):
        values = box.nominal.copy()
        values[DELTA] = delta
        rows.append(Scenario(index=i, values=values))
    return ScenarioSet(scenarios=rows, seed=None, box=grid_box)


def operating_region_box(
    params: HandObjectParams,
    x_eq: Sequence[float],
    px_range: Sequence[float] = (-0.02, 0.02),
    py_range: Sequence[float] = (0.02, 0.05),
    ptheta_range: Sequence[float] = (0.0, np.radians(11.0)),
    delta_range: Optional[Sequence[float]] = None,
    velocity_bounds: Sequence[float] = (0.0, 0.0, 0.0),
    joint_padding: float = np.radians(1.0),
    sweep_points: int = 7,
    free: Iterable[str] = ("q1", "q2", "q3", "q4", "py", "delta"),
    joint_sweep: Iterable[str] = ("py", "delta"),
) -> UncertaintyBox:
    """Box whose joint intervals cover the grasps reachable over the swept pose ranges.

    Joint intervals are the hull of inverse-kinematics solutions on a grid over
    the ``joint_sweep`` coordinates (px, py, ptheta, delta), widened by
    ``joint_padding``. Coordinates left out of the sweep stay at the equilibrium.
    """
    x_eq = np.asarray(x_eq, dtype=float)
    delta_range = params.delta_bounds if delta_range is None else delta_range
    sweep = set(joint_sweep)
    unknown = sorted(sweep - {"px", "py", "ptheta", "delta"})
    if unknown:
        raise DomainError(f"joint_sweep accepts px, py, ptheta and delta, got {unknown}")

    def axis(name, lo, hi, eq, points):
        return np.linspace(lo, hi, points) if name in sweep else np.array([eq])

    grids = [
        axis("px", px_range[0], px_range[1], x_eq[0], sweep_points),
        axis("py", py_range[0], py_range[1], x_eq[1], sweep_points),
        axis("ptheta", ptheta_range[0], ptheta_range[1], x_eq[2], sweep_points),
        axis("delta", delta_range[0], delta_range[1], 0.0, 3),
    ]
    joints = np.array(
        [inverse_kinematics(np.array([px, py, th]), d, params).q for px, py, th, d in itertools.product(*grids)]
    )
    q_lo = joints.min(axis=0) - joint_padding
    q_hi = joints.max(axis=0) + joint_padding
    q_eq = inverse_kinematics(x_eq, 0.0, params).q
    v = np.asarray(velocity_bounds, dtype=float)

    lower = np.concatenate([q_lo, [px_range[0], py_range[0], ptheta_range[0]], -v, [delta_range[0]]])
    upper = np.concatenate([q_hi, [px_range[1], py_range[1], ptheta_range[1]], v, [delta_range[1]]])
    nominal = np.concatenate([q_eq, x_eq, np.zeros(3), [0.0]])
    names = set(free)
    box = UncertaintyBox(lower=lower, upper=upper, nominal=nominal, free=tuple(n in names for n in COORDINATES))
    logger.debug("operating region box: %s", box.to_dict())
    return box
