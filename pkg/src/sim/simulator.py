"""Closed-loop simulation of the grasped object under static state feedback.

The object state x = (x_o, xdot_o) is integrated with classical RK4; finger
joints are rebuilt by inverse kinematics at every stage so the rigid contact
constraint J_h qdot = G_w^T xdot_o holds by construction. Torques are held
constant over a step.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.control.lmi import Controller
from src.errors import DimensionError, DomainError, SingularityError, UnreachableError
from src.model.dynamics import contact_forces, nonlinear_derivative
from src.model.kinematics import (
    grasp_map,
    grasp_map_world,
    grasp_nullspace,
    grasp_pseudo_inverse,
    hand_jacobian,
    inverse_kinematics,
)
from src.model.params import HandObjectParams
from src.sim.internal_force import CONE_MARGIN, cone_margins, internal_force_policy

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = (
    ["t", "px", "py", "ptheta", "vx", "vy", "omega"]
    + ["q1", "q2", "q3", "q4", "tau1", "tau2", "tau3", "tau4", "ux", "uy", "utheta", "lambda"]
    + ["f1_t", "f1_n", "f2_t", "f2_n", "residual", "cone_margin", "dist_fx", "dist_fy", "dist_m"]
    + ["ref_px", "ref_py", "ref_ptheta"]
)
CSV_FLOAT_FORMAT = "%.9e"


class Termination:
    COMPLETED = "completed"
    DIVERGED = "diverged"
    UNREACHABLE = "unreachable"
    SINGULAR = "singular"
    FRICTION = "friction_cone_violation"
    CONTACT_RISK = "contact_risk"


@dataclass(frozen=True)
class SimConfig:
    x0: np.ndarray
    x_ref: np.ndarray
    dt: float = 1e-3
    horizon: float = 5.0
    delta_true: float = 0.0
    delta_hat: float = 0.0
    xd0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    filter_time_constant: float = 0.3
    force_margin: float = CONE_MARGIN
    min_normal_force: Optional[float] = None
    divergence_factor: float = 1.5
    divergence_floor: tuple = (0.005, 0.1)
    name: str = ""

    def __post_init__(self):
        for attr in ("x0", "x_ref", "xd0"):
            value = np.asarray(getattr(self, attr), dtype=float).reshape(-1)
            if value.shape != (3,):
                raise DimensionError(f"{attr} must have 3 entries")
            object.__setattr__(self, attr, value)
        if not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.horizon < self.dt:
            raise DomainError("horizon must be at least one time step")
        if self.filter_time_constant < 0.0:
            raise DomainError("filter time constant must be non-negative")

    def validate(self, params: HandObjectParams) -> None:
        params.check_delta(self.delta_true)
        params.check_delta(self.delta_hat)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def reference(self, t: float) -> np.ndarray:
        """First-order filtered step from x0 to x_ref."""
        if self.filter_time_constant == 0.0:
            return self.x_ref.copy()
        return self.x_ref + (self.x0 - self.x_ref) * math.exp(-t / self.filter_time_constant)


class TrajectorySummary(BaseModel):
    name: str = ""
    reason: str
    steps: int
    final_time: float
    final_position_error: float
    final_orientation_error: float
    settling_time: Optional[float] = None
    overshoot: float = 0.0
    min_cone_margin: float
    max_disturbance: float
    max_residual: float
    converged: bool
    delta_true: float
    delta_hat: float
    pole_dispersion: Optional[float] = None
    in_region_fraction: Optional[float] = None


@dataclass
class Trajectory:
    config: SimConfig
    rows: List[np.ndarray] = field(default_factory=list)
    reason: str = Termination.COMPLETED
    message: str = ""

    @property
    def data(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(TRAJECTORY_COLUMNS)))
        return np.vstack(self.rows)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRAJECTORY_COLUMNS.index(name)]

    def columns(self, *names: str) -> np.ndarray:
        idx = [TRAJECTORY_COLUMNS.index(n) for n in names]
        return self.data[:, idx]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def x_o(self) -> np.ndarray:
        return self.columns("px", "py", "ptheta")

    @property
    def xd_o(self) -> np.ndarray:
        return self.columns("vx", "vy", "omega")

    @property
    def q(self) -> np.ndarray:
        return self.columns("q1", "q2", "q3", "q4")

    @property
    def tau(self) -> np.ndarray:
        return self.columns("tau1", "tau2", "tau3", "tau4")

    @property
    def forces(self) -> np.ndarray:
        return self.columns("f1_t", "f1_n", "f2_t", "f2_n")

    @property
    def disturbance(self) -> np.ndarray:
        return self.columns("dist_fx", "dist_fy", "dist_m")

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.data, columns=TRAJECTORY_COLUMNS)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, delta_true: float = 0.0, delta_hat: float = 0.0, reason: str = Termination.COMPLETED, name: str = ""
    ) -> "Trajectory":
        """Rebuild a logged trajectory; x0 and x_ref come from the first state and the last reference."""
        missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
        if missing:
            raise DimensionError(f"trajectory table lacks columns {missing}")
        if frame.empty:
            raise DomainError("trajectory table is empty")
        data = frame[TRAJECTORY_COLUMNS].to_numpy(dtype=float)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1e-3
        config = SimConfig(
            x0=data[0, 1:4],
            x_ref=data[-1, -3:],
            xd0=data[0, 4:7],
            dt=dt,
            horizon=max(float(t[-1]), dt),
            delta_true=delta_true,
            delta_hat=delta_hat,
            filter_time_constant=0.0,
            name=name,
        )
        return cls(config=config, rows=list(data), reason=reason)

    def summary(self, position_tolerance: float = 1e-3, angle_tolerance: float = math.radians(1.0)) -> TrajectorySummary:
        cfg = self.config
        if not self.rows:
            return TrajectorySummary(
                name=cfg.name, reason=self.reason, steps=0, final_time=0.0,
                final_position_error=float("nan"), final_orientation_error=float("nan"),
                min_cone_margin=float("nan"), max_disturbance=0.0, max_residual=0.0, converged=False,
                delta_true=cfg.delta_true, delta_hat=cfg.delta_hat,
            )
        x_o, t = self.x_o, self.t
        pos_err = np.linalg.norm(x_o[:, :2] - cfg.x_ref[:2], axis=1)
        ang_err = np.abs(x_o[:, 2] - cfg.x_ref[2])
        settling = None
        if pos_err[0] > 0.0:
            outside = np.flatnonzero(pos_err > 0.02 * pos_err[0])
            if outside.size == 0:
                settling = 0.0
            elif outside[-1] + 1 < len(t):
                settling = float(t[outside[-1] + 1])
        step = cfg.x_ref[:2] - cfg.x0[:2]
        overshoot = 0.0
        if np.linalg.norm(step) > 0.0:
            progress = (x_o[:, :2] - cfg.x0[:2]) @ step / float(step @ step)
            overshoot = max(0.0, float(progress.max()) - 1.0)
        final_pos, final_ang = float(pos_err[-1]), float(ang_err[-1])
        return TrajectorySummary(
            name=cfg.name,
            reason=self.reason,
            steps=len(self.rows),
            final_time=float(t[-1]),
            final_position_error=final_pos,
            final_orientation_error=final_ang,
            settling_time=settling,
            overshoot=overshoot,
            min_cone_margin=float(self.column("cone_margin").min()),
            max_disturbance=float(np.abs(self.disturbance).max()),
            max_residual=float(self.column("residual").max()),
            converged=self.reason == Termination.COMPLETED
            and final_pos <= position_tolerance
            and final_ang <= angle_tolerance,
            delta_true=cfg.delta_true,
            delta_hat=cfg.delta_hat,
        )


def control_input(gain: np.ndarray, x: np.ndarray, x_ref: np.ndarray) -> np.ndarray:
    """u = L x_ref - L x for a 6-dim state and reference."""
    gain = np.asarray(gain, dtype=float)
    x, x_ref = np.asarray(x, dtype=float), np.asarray(x_ref, dtype=float)
    if gain.shape != (3, 6) or x.shape != (6,) or x_ref.shape != (6,):
        raise DimensionError("expected a 3x6 gain and 6-dim state and reference")
    return gain @ x_ref - gain @ x


def joint_torques(
    u: np.ndarray, lam: float, q: np.ndarray, x_o: np.ndarray, delta_hat: float, params: HandObjectParams
) -> np.ndarray:
    """tau = J_h^T Ghat^+ u + J_h^T Nhat lam with the grasp map built from the estimate delta_hat."""
    J = hand_jacobian(q, x_o, params)
    G_hat = grasp_map_world(x_o, delta_hat, params)
    N_hat = grasp_nullspace(grasp_map(delta_hat, params).G)
    return J.T @ (grasp_pseudo_inverse(G_hat) @ np.asarray(u, dtype=float) + N_hat * lam)


def rk4_step(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    k1 = fn(x)
    k2 = fn(x + 0.5 * dt * k1)
    k3 = fn(x + 0.5 * dt * k2)
    k4 = fn(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(x: np.ndarray, tau: np.ndarray, delta_true: float, dt: float, params: HandObjectParams) -> np.ndarray:
    return rk4_step(lambda s: nonlinear_derivative(s, tau, delta_true, params), np.asarray(x, dtype=float), dt)


def _diverged(x: np.ndarray, cfg: SimConfig) -> bool:
    if not np.all(np.isfinite(x)):
        return True
    initial_pos = float(np.linalg.norm(cfg.x0[:2] - cfg.x_ref[:2]))
    initial_ang = abs(float(cfg.x0[2] - cfg.x_ref[2]))
    pos = float(np.linalg.norm(x[:2] - cfg.x_ref[:2]))
    ang = abs(float(x[2] - cfg.x_ref[2]))
    return (
        pos > cfg.divergence_factor * initial_pos + cfg.divergence_floor[0]
        or ang > cfg.divergence_factor * initial_ang + cfg.divergence_floor[1]
    )


def simulate(
    controller: Union[Controller, np.ndarray],
    config: SimConfig,
    params: HandObjectParams,
    on_step: Optional[Callable[[int, np.ndarray], None]] = None,
) -> Trajectory:
    """Run the full loop: feedback law, torque map with internal forces, nonlinear RK4 step."""
    gain = controller.gain if isinstance(controller, Controller) else np.asarray(controller, dtype=float)
    config.validate(params)
    mu = params.friction_coefficient
    f_min = params.min_normal_force if config.min_normal_force is None else config.min_normal_force
    N_hat = grasp_nullspace(grasp_map(config.delta_hat, params).G)
    trajectory = Trajectory(config=config)
    x = np.concatenate([config.x0, config.xd0])

    for k in range(config.steps + 1):
        t = k * config.dt
        x_o, xd_o = x[:3], x[3:]
        ref = config.reference(t)
        try:
            q = inverse_kinematics(x_o, config.delta_true, params).q
            J = hand_jacobian(q, x_o, params)
            G_true = grasp_map_world(x_o, config.delta_true, params)
            qd = np.linalg.solve(J, G_true.T @ xd_o)

            u = control_input(gain, x, np.concatenate([ref, np.zeros(3)]))
            tau_motion = joint_torques(u, 0.0, q, x_o, config.delta_hat, params)
            predicted = contact_forces(x, tau_motion, config.delta_hat, params)
            squeeze = internal_force_policy(predicted, N_hat, mu, f_min, config.force_margin)
            tau = tau_motion + J.T @ N_hat * squeeze.lam
            forces = contact_forces(x, tau, config.delta_true, params)
        except UnreachableError as exc:
            trajectory.reason, trajectory.message = Termination.UNREACHABLE, str(exc)
            break
        except SingularityError as exc:
            trajectory.reason, trajectory.message = Termination.SINGULAR, str(exc)
            break

        margin = float(cone_margins(forces, mu).min())
        disturbance = G_true @ N_hat * squeeze.lam
        residual = float(np.linalg.norm(J @ qd - G_true.T @ xd_o))
        trajectory.rows.append(
            np.concatenate(
                [[t], x, q, tau, u, [squeeze.lam], forces, [residual, margin], disturbance, ref]
            )
        )
        if on_step is not None:
            on_step(k, x)

        if squeeze.contact_risk:
            trajectory.reason = Termination.CONTACT_RISK
            trajectory.message = f"no admissible squeeze at t={t:.4f}s (bounds {squeeze.lower:.4g} > {squeeze.upper:.4g})"
            break
        if margin < 0.0:
            trajectory.reason = Termination.FRICTION
            trajectory.message = f"friction cone left at t={t:.4f}s (margin {margin:.4g} N)"
            break
        if k == config.steps:
            break

        try:
            x = step(x, tau, config.delta_true, config.dt, params)
        except UnreachableError as exc:
            trajectory.reason, trajectory.message = Termination.UNREACHABLE, str(exc)
            break
        except SingularityError as exc:
            trajectory.reason, trajectory.message = Termination.SINGULAR, str(exc)
            break
        if _diverged(x, config):
            trajectory.reason = Termination.DIVERGED
            trajectory.message = f"state left the tracking envelope at t={t + config.dt:.4f}s"
            break

    logger.info(
        "simulation %s finished: %s after %d steps", config.name or "(unnamed)", trajectory.reason, len(trajectory)
    )
    return trajectory


def simulate_batch(controller, configs: List[SimConfig], params: HandObjectParams, workers: int = 1) -> Dict[str, Trajectory]:
    """Independent simulations, returned keyed by config name in input order."""
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda cfg: simulate(controller, cfg, params), configs))
    return {cfg.name or str(i): traj for i, (cfg, traj) in enumerate(zip(configs, results))}
