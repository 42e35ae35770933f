import hashlib
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.config import ExperimentConfig, PoseConfig
from src.control.lmi import DRegion
from src.errors import ConfigError
from src.model.params import HandObjectParams
from src.scenario.box import UncertaintyBox, operating_region_box
from src.sim.simulator import CSV_FLOAT_FORMAT, SimConfig

logger = logging.getLogger(__name__)

MM = 1e-3
G = 1e-3
G_MM2 = 1e-9

PathLike = Union[str, Path]


# ----------------------------
# Config ingestion
# ----------------------------
def parse_config_file(filename: str, content: bytes) -> ExperimentConfig:
    if not filename.endswith(".json"):
        raise ConfigError(f"unsupported config format: {filename} (expected .json)")
    try:
        raw = json.loads(content.decode() or "{}")
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{filename}: not valid JSON ({exc})") from exc
    return parse_config(raw, source=filename)


def parse_config(raw: Dict[str, Any], source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: Optional[PathLike]) -> ExperimentConfig:
    """Read a config file; no path means all defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_file(path.name, path.read_bytes())


def load_params(path: Optional[PathLike]) -> HandObjectParams:
    return to_params(load_config(path))


def to_params(cfg: ExperimentConfig) -> HandObjectParams:
    hand = cfg.hand
    try:
        return HandObjectParams(
            base_positions=_scaled(hand.base_positions_mm, MM),
            link_lengths=_scaled(hand.link_lengths_mm, MM),
            link_masses=_scaled(hand.link_masses_g, G),
            link_inertias=_scaled(hand.link_inertias_g_mm2, G_MM2),
            object_mass=hand.object_mass_g * G,
            object_inertia=hand.object_inertia_g_mm2 * G_MM2,
            half_width=hand.half_width_mm * MM,
            friction_coefficient=hand.friction_coefficient,
            min_normal_force=hand.min_normal_force_n,
            delta_bounds=(hand.delta_bounds_mm[0] * MM, hand.delta_bounds_mm[1] * MM),
            joint_limits=(math.radians(hand.joint_limits_deg[0]), math.radians(hand.joint_limits_deg[1])),
            singularity_threshold=hand.singularity_threshold,
        )
    except ValidationError as exc:
        raise ConfigError(f"hand parameters: {exc}") from exc


def _scaled(pairs, factor: float):
    return tuple((a * factor, b * factor) for a, b in pairs)


def pose(p: PoseConfig) -> np.ndarray:
    return np.array([p.px_mm * MM, p.py_mm * MM, math.radians(p.ptheta_deg)])


def equilibrium(cfg: ExperimentConfig) -> np.ndarray:
    return pose(cfg.box.equilibrium)


def to_region(cfg: ExperimentConfig) -> DRegion:
    r = cfg.region
    return DRegion.from_degrees(r.alpha, r.radius, r.theta_deg)


def to_box(cfg: ExperimentConfig, params: HandObjectParams, free: Optional[List[str]] = None) -> UncertaintyBox:
    b = cfg.box
    v = b.velocity_bounds
    return operating_region_box(
        params,
        equilibrium(cfg),
        px_range=(b.px_range_mm[0] * MM, b.px_range_mm[1] * MM),
        py_range=(b.py_range_mm[0] * MM, b.py_range_mm[1] * MM),
        ptheta_range=(math.radians(b.ptheta_range_deg[0]), math.radians(b.ptheta_range_deg[1])),
        delta_range=None if b.delta_range_mm is None else (b.delta_range_mm[0] * MM, b.delta_range_mm[1] * MM),
        velocity_bounds=(v.vx_mm_s * MM, v.vy_mm_s * MM, math.radians(v.omega_deg_s)),
        joint_padding=math.radians(b.joint_padding_deg),
        sweep_points=b.sweep_points,
        free=b.free if free is None else free,
        joint_sweep=b.joint_sweep,
    )


def grid_deltas(cfg: ExperimentConfig, params: HandObjectParams) -> np.ndarray:
    lo, hi = params.delta_bounds if cfg.box.delta_range_mm is None else np.asarray(cfg.box.delta_range_mm) * MM
    return np.linspace(lo, hi, cfg.design.grid_points)


def sim_configs(cfg: ExperimentConfig) -> List[SimConfig]:
    """One case per initial condition and true offset, named like ``IC1_delta+5.0mm``."""
    s = cfg.simulation
    offset = pose(s.reference_offset)
    cases = []
    for ic_name, ic in s.initial_conditions.items():
        x0 = pose(ic)
        for delta_mm in s.delta_true_mm:
            cases.append(
                SimConfig(
                    x0=x0,
                    x_ref=x0 + offset,
                    dt=s.dt_s,
                    horizon=s.horizon_s,
                    delta_true=delta_mm * MM,
                    delta_hat=s.delta_hat_mm * MM,
                    filter_time_constant=s.filter_time_constant_s,
                    force_margin=s.force_margin,
                    min_normal_force=s.min_normal_force_n,
                    name=f"{ic_name}_delta{delta_mm:+.1f}mm",
                )
            )
    return cases


# ----------------------------
# Artifacts
# ----------------------------
def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, separators=(",", ": "), allow_nan=True) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(data))
    logger.info("wrote %s", path)
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def parse_table(filename: str, content: bytes) -> pd.DataFrame:
    if not filename.endswith(".csv"):
        raise ConfigError(f"unsupported table format: {filename} (expected .csv)")
    frame = pd.read_csv(io.BytesIO(content))
    frame.columns = [col.strip() for col in frame.columns]
    return frame


def read_csv(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    return parse_table(path.name, path.read_bytes())
