from typing import List, Optional

from pydantic import BaseModel, ConfigDict


class ViolationEstimate(BaseModel):
    samples: int
    violations: int
    rate: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95
    pole_violations: int = 0
    pole_rate: float = 0.0
    skipped: int = 0
    seed: Optional[int] = None
    box_free: Optional[List[str]] = None


class FeasibilityCertificate(BaseModel):
    model_config = ConfigDict(extra="forbid")

    designer: str
    status: str
    eps: Optional[float] = None
    beta: Optional[float] = None
    decision_variables: int
    required_samples: Optional[int] = None
    used_samples: int
    truncated: bool = False
    seed: Optional[int] = None
    gamma: Optional[float] = None
    max_training_margin: Optional[float] = None
    skipped_scenarios: List[int] = []
    solver: str = ""
    solver_message: str = ""
    message: str = ""
    violation: Optional[ViolationEstimate] = None
    config_hash: Optional[str] = None


class OptimalityCertificate(FeasibilityCertificate):
    mu: float
    n_xi: int
    lipschitz_blocks: List[float]
    lipschitz_aggregate: float
    aggregation: str = "max"
    tightening: float
    eps_effective: float
    degenerate: bool = False
    # False when required_samples is the closed-form bound rather than the exact minimum
    required_exact: bool = True
