from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.config import ExperimentConfig
from src.control.linearization import decision_variable_count

Designer = Literal["grid", "feasibility", "optimality"]
Solver = Literal["clarabel", "scs", "reference"]


class SampleSizeRequest(BaseModel):
    eps: float
    beta: float
    d: int = decision_variable_count()
    n_xi: Optional[int] = None
    L_xi: Optional[float] = None
    max_samples: Optional[int] = None


class LipschitzRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    pairs: int = Field(default=50, ge=2)
    seed: int = 0
    free: Optional[List[str]] = None
    mu: Optional[float] = Field(default=None, gt=0.0)


class DesignRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    designer: Optional[Designer] = None
    solver: Optional[Solver] = None


class ControllerModel(BaseModel):
    """Controller JSON as written by the design step."""

    model_config = ConfigDict(extra="allow")

    gain: List[List[float]]
    P: List[List[float]]
    Y: List[List[float]]
    gamma: float
    region: Dict[str, float]
    designer: str = "feasibility"
    seed: Optional[int] = None
    provenance: Dict[str, Any] = {}


class SimulateRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    controller: ControllerModel
    flip: bool = False
    cases: Optional[List[str]] = None


class AnalyzeRequest(SimulateRequest):
    violation_samples: Optional[int] = Field(default=None, ge=0)


class PipelineRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    designers: Optional[List[Designer]] = None
    solver: Optional[Solver] = None


class DesignResponse(BaseModel):
    designer: str
    feasible: bool
    controller: Optional[Dict[str, Any]] = None
    certificate: Dict[str, Any]
