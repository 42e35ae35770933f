"""Experiment configuration schema.

Keys carry their units (``_mm``, ``_g``, ``_deg``, ``_g_mm2``, ``_s``);
``src.utils.parser`` converts a validated document to SI objects. Unknown
keys are rejected everywhere.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.scenario.box import COORDINATES

Pair = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HandConfig(_Strict):
    base_positions_mm: Tuple[Pair, Pair] = ((35.0, 0.0), (-35.0, 0.0))
    link_lengths_mm: Tuple[Pair, Pair] = ((45.0, 45.0), (45.0, 45.0))
    link_masses_g: Tuple[Pair, Pair] = ((50.0, 50.0), (50.0, 50.0))
    link_inertias_g_mm2: Tuple[Pair, Pair] = ((8437.5, 8437.5), (8437.5, 8437.5))
    object_mass_g: float = 20.0
    object_inertia_g_mm2: float = 6000.0
    half_width_mm: float = 17.5
    friction_coefficient: float = 0.8
    min_normal_force_n: float = 0.5
    delta_bounds_mm: Pair = (-4.0, 5.0)
    joint_limits_deg: Pair = (-180.0, 180.0)
    singularity_threshold: float = 1.0e6


class PoseConfig(_Strict):
    px_mm: float = 0.0
    py_mm: float = 0.0
    ptheta_deg: float = 0.0


class VelocityConfig(_Strict):
    vx_mm_s: float = 0.0
    vy_mm_s: float = 0.0
    omega_deg_s: float = 0.0


class BoxConfig(_Strict):
    equilibrium: PoseConfig = PoseConfig(px_mm=0.0, py_mm=35.0, ptheta_deg=0.0)
    px_range_mm: Pair = (-20.0, 20.0)
    py_range_mm: Pair = (20.0, 50.0)
    ptheta_range_deg: Pair = (0.0, 11.0)
    delta_range_mm: Optional[Pair] = None
    velocity_bounds: VelocityConfig = VelocityConfig()
    joint_padding_deg: float = 1.0
    sweep_points: int = Field(default=7, ge=2)
    free: List[str] = ["q1", "q2", "q3", "q4", "py", "delta"]
    joint_sweep: List[str] = ["py", "delta"]

    @field_validator("free")
    @classmethod
    def _known_coordinates(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(COORDINATES))
        if unknown:
            raise ValueError(f"unknown box coordinates {unknown}; expected a subset of {list(COORDINATES)}")
        if not value:
            raise ValueError("at least one coordinate must be free")
        return value

    @field_validator("joint_sweep")
    @classmethod
    def _pose_coordinates(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - {"px", "py", "ptheta", "delta"})
        if unknown:
            raise ValueError(f"joint_sweep accepts px, py, ptheta and delta, got {unknown}")
        return value

    @model_validator(mode="after")
    def _ordered_ranges(self):
        for name in ("px_range_mm", "py_range_mm", "ptheta_range_deg", "delta_range_mm"):
            value = getattr(self, name)
            if value is not None and value[0] > value[1]:
                raise ValueError(f"{name} must be ordered (lower, upper)")
        return self


class RegionConfig(_Strict):
    alpha: float = 0.5
    radius: float = 7.0
    theta_deg: float = 30.0


class OptimalityDesignConfig(_Strict):
    eps: float = 0.99
    beta: float = 0.999
    mu: float = 1.0e3
    free: List[str] = ["q1", "q2", "q3", "q4"]
    lipschitz_blocks: Optional[Tuple[float, float, float]] = None
    aggregation: Literal["max", "sum"] = "max"
    max_samples: Optional[int] = Field(default=400, ge=1)
    lipschitz_pairs: int = Field(default=200, ge=2)


class DesignConfig(_Strict):
    designer: Literal["grid", "feasibility", "optimality"] = "feasibility"
    eps: float = 0.5
    beta: float = 1.0e-3
    seed: int = 2024
    samples: Optional[int] = Field(default=None, ge=1)
    grid_points: int = Field(default=46, ge=1)
    delta_hat_mm: float = 0.0
    eta: float = 1.0e-9
    gamma_floor: float = Field(default=-1.0, ge=-1.0e6, le=-1.0e-9)
    solver: Optional[Literal["clarabel", "scs", "reference"]] = None
    violation_samples: int = Field(default=2000, ge=0)
    violation_seed: int = 7
    optimality: OptimalityDesignConfig = OptimalityDesignConfig()


class SimulationConfig(_Strict):
    dt_s: float = Field(default=1.0e-3, gt=0.0)
    horizon_s: float = Field(default=5.0, gt=0.0)
    delta_true_mm: List[float] = [-4.0, 0.0, 5.0]
    delta_hat_mm: float = 0.0
    initial_conditions: Dict[str, PoseConfig] = {
        "IC1": PoseConfig(px_mm=-20.0, py_mm=50.0, ptheta_deg=0.0),
        "IC2": PoseConfig(px_mm=-20.0, py_mm=20.0, ptheta_deg=0.0),
    }
    reference_offset: PoseConfig = PoseConfig(px_mm=40.0, py_mm=0.0, ptheta_deg=11.0)
    filter_time_constant_s: float = Field(default=0.3, ge=0.0)
    min_normal_force_n: Optional[float] = None
    force_margin: float = Field(default=0.1, ge=0.0, lt=1.0)
    pole_stride: int = Field(default=50, ge=1)


class ExperimentConfig(_Strict):
    hand: HandConfig = HandConfig()
    box: BoxConfig = BoxConfig()
    region: RegionConfig = RegionConfig()
    design: DesignConfig = DesignConfig()
    simulation: SimulationConfig = SimulationConfig()
    output_dir: Optional[str] = None
