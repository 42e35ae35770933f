import logging
from dataclasses import asdict
from typing import Any, Dict

from fastapi import APIRouter, HTTPException

from src import experiments
from src.api.models import (
    AnalyzeRequest,
    DesignRequest,
    DesignResponse,
    LipschitzRequest,
    PipelineRequest,
    SampleSizeRequest,
    SimulateRequest,
)
from src.control.lmi import Controller
from src.errors import ConfigError, DimensionError, DomainError, GraspScpError, InfeasibleDesignError
from src.scenario.bounds import lipschitz_lmi
from src.scenario.lipschitz import estimate_dynamics_lipschitz
from src.sdp import available_solvers
from src.utils import parser

logger = logging.getLogger(__name__)

router = APIRouter()


def _http_error(exc: GraspScpError) -> HTTPException:
    if isinstance(exc, (DomainError, ConfigError, DimensionError)):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, InfeasibleDesignError):
        return HTTPException(status_code=409, detail=str(exc))
    logger.exception("request failed")
    return HTTPException(status_code=500, detail=str(exc))


def _selected_cases(req: SimulateRequest):
    cases = parser.sim_configs(req.config)
    if req.cases is None:
        return cases
    unknown = sorted(set(req.cases) - {c.name for c in cases})
    if unknown:
        raise DomainError(f"unknown simulation cases {unknown}")
    return [c for c in cases if c.name in req.cases]


@router.get("/health")
def health() -> Dict[str, Any]:
    return {"status": "ok", "solvers": available_solvers()}


@router.post("/sample-size")
def sample_size(req: SampleSizeRequest) -> Dict[str, Any]:
    try:
        return experiments.run_sample_size(req.eps, req.beta, req.d, req.n_xi, req.L_xi, req.max_samples)
    except GraspScpError as exc:
        raise _http_error(exc)


@router.post("/lipschitz")
def lipschitz(req: LipschitzRequest) -> Dict[str, Any]:
    try:
        params = parser.to_params(req.config)
        box = parser.to_box(req.config, params, free=req.free)
        dyn = estimate_dynamics_lipschitz(box, req.pairs, req.seed, params=params)
        result: Dict[str, Any] = {"n_xi": box.n_xi, "dynamics": dyn.to_dict()}
        if req.mu is not None:
            blocks = lipschitz_lmi(req.mu, parser.to_region(req.config).theta, dyn.L_A, dyn.L_B)
            result["blocks"] = asdict(blocks)
        return result
    except GraspScpError as exc:
        raise _http_error(exc)


@router.post("/design", response_model=DesignResponse)
def design(req: DesignRequest) -> DesignResponse:
    try:
        outcome = experiments.run_design(req.config, req.designer, solver=req.solver)
        if not outcome.feasible:
            raise InfeasibleDesignError(
                f"{outcome.designer} design returned {outcome.result.status.value}: {outcome.result.certificate.message}"
            )
    except GraspScpError as exc:
        raise _http_error(exc)
    return DesignResponse(
        designer=outcome.designer,
        feasible=True,
        controller=outcome.controller.to_dict(),
        certificate=outcome.certificate(),
    )


@router.post("/simulate")
def simulate(req: SimulateRequest) -> Dict[str, Any]:
    try:
        controller = Controller.from_dict(req.controller.model_dump())
        outcome = experiments.run_simulate(req.config, controller, cases=_selected_cases(req), flip=req.flip)
        return outcome.to_dict()
    except GraspScpError as exc:
        raise _http_error(exc)


@router.post("/analyze")
def analyze(req: AnalyzeRequest) -> Dict[str, Any]:
    try:
        controller = Controller.from_dict(req.controller.model_dump())
        sims = experiments.run_simulate(req.config, controller, cases=_selected_cases(req), flip=req.flip)
        trajectories = {name: t for name, t in sims.trajectories.items() if len(t)}
        outcome = experiments.run_analyze(
            req.config, controller.flipped() if req.flip else controller, trajectories,
            violation_samples=req.violation_samples,
        )
        return outcome.report
    except GraspScpError as exc:
        raise _http_error(exc)


@router.post("/pipeline")
def pipeline(req: PipelineRequest) -> Dict[str, Any]:
    from src.pipeline.graph import run_pipeline

    try:
        return run_pipeline(req.config, designers=req.designers, solver=req.solver)["summary"]
    except GraspScpError as exc:
        raise _http_error(exc)
