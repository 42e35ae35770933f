"""Experiment runners shared by the CLI, the HTTP routes and the experiment graph.

Each runner takes a validated ExperimentConfig, does the work and writes its
artifacts (when an output directory is given) as canonical JSON and
fixed-precision CSV tagged with the config hash and seeds.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.config import ExperimentConfig
from src.control.linearization import decision_variable_count
from src.control.lmi import Controller
from src.errors import DomainError
from src.model.params import HandObjectParams
from src.scenario.bounds import SAMPLE_LIMIT, binomial_tail, sample_size_feasibility, sample_size_optimality
from src.scenario.box import UncertaintyBox, draw_scenarios
from src.scenario.certificates import ViolationEstimate
from src.scenario.certify import empirical_violation
from src.scenario.design import (
    DesignOptions,
    DesignResult,
    OptimalityConfig,
    solve_feasibility_scp,
    solve_grid_baseline,
    solve_optimality_scp,
)
from src.scenario.lipschitz import estimate_dynamics_lipschitz
from src.sim.poles import PoleTrace, pole_trace
from src.sim.simulator import SimConfig, Termination, Trajectory, TrajectorySummary, simulate
from src.utils import parser

logger = logging.getLogger(__name__)

MM = parser.MM


# ----------------------------
# sample-size
# ----------------------------
def run_sample_size(
    eps: float,
    beta: float,
    d: int,
    n_xi: Optional[int] = None,
    L_xi: Optional[float] = None,
    max_samples: Optional[int] = None,
) -> Dict[str, Any]:
    """Feasibility sample size, or the optimality one when n_xi and L_xi are both given."""
    if (n_xi is None) != (L_xi is None):
        raise DomainError("optimality sizing needs both n_xi and L_xi")
    if n_xi is None:
        N = sample_size_feasibility(eps, beta, d)
        return {
            "mode": "feasibility",
            "eps": eps,
            "beta": beta,
            "d": d,
            "N": N,
            "exact": N <= SAMPLE_LIMIT,
            "tail": binomial_tail(N, eps, d) if N <= SAMPLE_LIMIT else None,
            "tail_previous": None if N > SAMPLE_LIMIT else binomial_tail(N - 1, eps, d) if N > 1 else 1.0,
        }
    sizing = sample_size_optimality(eps, beta, n_xi, L_xi, d, max_samples)
    return {
        "mode": "optimality",
        "eps": eps,
        "beta": beta,
        "d": d,
        "n_xi": n_xi,
        "L_xi": L_xi,
        "N": sizing.required_samples,
        "used_samples": sizing.used_samples,
        "truncated": sizing.truncated,
        "tightening": sizing.tightening,
        "eps_effective": sizing.eps_effective,
        "degenerate": sizing.degenerate,
        "exact": sizing.exact,
        "tail": binomial_tail(sizing.required_samples, sizing.eps_effective, d) if sizing.exact else None,
    }


# ----------------------------
# design
# ----------------------------
@dataclass
class DesignOutcome:
    designer: str
    result: DesignResult
    config_hash: str
    artifacts: List[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.result.feasible

    @property
    def controller(self) -> Optional[Controller]:
        return self.result.controller

    def certificate(self) -> Dict[str, Any]:
        return self.result.certificate.model_dump(mode="json")


def design_options(cfg: ExperimentConfig, solver: Optional[str] = None, workers: Optional[int] = None) -> DesignOptions:
    return DesignOptions(
        eta=cfg.design.eta, gamma_floor=cfg.design.gamma_floor, solver=solver or cfg.design.solver, workers=workers
    )


def optimality_config(cfg: ExperimentConfig, params: HandObjectParams, workers: Optional[int] = None) -> OptimalityConfig:
    opt = cfg.design.optimality
    box = parser.to_box(cfg, params, free=opt.free)
    if opt.lipschitz_blocks is not None:
        return OptimalityConfig(
            eps=opt.eps, beta=opt.beta, mu=opt.mu, lipschitz_blocks=tuple(opt.lipschitz_blocks), n_xi=box.n_xi,
            aggregation=opt.aggregation, max_samples=opt.max_samples,
        )
    dyn = estimate_dynamics_lipschitz(
        box, opt.lipschitz_pairs, cfg.design.seed, params=params, delta_hat=cfg.design.delta_hat_mm * MM, workers=workers
    )
    return OptimalityConfig.from_dynamics(
        opt.eps, opt.beta, opt.mu, parser.to_region(cfg).theta, dyn.L_A, dyn.L_B, box.n_xi,
        aggregation=opt.aggregation, max_samples=opt.max_samples,
    )


def violation_box(cfg: ExperimentConfig, params: HandObjectParams, designer: str) -> UncertaintyBox:
    """Box a controller is certified on: the restricted one for optimality designs, the full one otherwise."""
    if designer.split("-")[0] == "optimality":
        return parser.to_box(cfg, params, free=cfg.design.optimality.free)
    return parser.to_box(cfg, params)


def _estimate_violation(
    cfg: ExperimentConfig, controller: Controller, params: HandObjectParams, samples: int, workers: Optional[int]
) -> ViolationEstimate:
    box = violation_box(cfg, params, controller.designer)
    estimate = empirical_violation(
        controller, box, samples, cfg.design.violation_seed, params,
        delta_hat=cfg.design.delta_hat_mm * MM, workers=workers,
    )
    estimate.box_free = box.free_names
    return estimate


def run_design(
    cfg: ExperimentConfig,
    designer: Optional[str] = None,
    output_dir: Optional[Path] = None,
    solver: Optional[str] = None,
    workers: Optional[int] = None,
) -> DesignOutcome:
    designer = designer or cfg.design.designer
    params = parser.to_params(cfg)
    region = parser.to_region(cfg)
    box = parser.to_box(cfg, params)
    options = design_options(cfg, solver, workers)
    delta_hat = cfg.design.delta_hat_mm * MM
    digest = parser.config_hash(cfg)
    logger.info("designing %s controller (config %s)", designer, digest[:12])

    if designer == "grid":
        result = solve_grid_baseline(parser.grid_deltas(cfg, params), region, params, box, options, delta_hat)
    elif designer == "feasibility":
        d = decision_variable_count()
        N = cfg.design.samples or sample_size_feasibility(cfg.design.eps, cfg.design.beta, d)
        scenarios = draw_scenarios(box, N, cfg.design.seed)
        result = solve_feasibility_scp(scenarios, region, params, cfg.design.eps, cfg.design.beta, options, delta_hat)
    elif designer == "optimality":
        opt_cfg = optimality_config(cfg, params, workers)
        sizing = opt_cfg.sample_size(decision_variable_count())
        opt_box = parser.to_box(cfg, params, free=cfg.design.optimality.free)
        scenarios = draw_scenarios(opt_box, cfg.design.samples or sizing.used_samples, cfg.design.seed)
        result = solve_optimality_scp(scenarios, region, params, opt_cfg, options, delta_hat)
    else:
        raise DomainError(f"unknown designer {designer!r}; expected grid, feasibility or optimality")

    result.certificate.config_hash = digest
    if result.controller is not None:
        result.controller.provenance["config_hash"] = digest
        if cfg.design.violation_samples > 0:
            result.certificate.violation = _estimate_violation(
                cfg, result.controller, params, cfg.design.violation_samples, workers
            )

    outcome = DesignOutcome(designer=designer, result=result, config_hash=digest)
    if output_dir is not None:
        out = Path(output_dir)
        if result.controller is not None:
            outcome.artifacts.append(str(parser.write_json(out / f"controller_{designer}.json", result.controller.to_dict())))
        outcome.artifacts.append(str(parser.write_json(out / f"certificate_{designer}.json", outcome.certificate())))
    return outcome


def load_controller(path) -> Controller:
    return Controller.from_dict(parser.read_json(path))


# ----------------------------
# simulate
# ----------------------------
@dataclass
class SimulationOutcome:
    trajectories: Dict[str, Trajectory]
    summaries: Dict[str, TrajectorySummary]
    config_hash: str
    artifacts: List[str] = field(default_factory=list)

    @property
    def failed_cases(self) -> List[str]:
        """Cases stopped early for any reason: divergence, lost contact, unreachable or singular grasps."""
        return [name for name, s in self.summaries.items() if s.reason != Termination.COMPLETED]

    @property
    def diverged(self) -> bool:
        return bool(self.failed_cases)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "cases": {name: s.model_dump(mode="json") for name, s in self.summaries.items()},
        }


def _summarize(trajectory: Trajectory, trace: Optional[PoleTrace]) -> TrajectorySummary:
    summary = trajectory.summary()
    if trace is not None and len(trace):
        summary.pole_dispersion = trace.dispersion()
        summary.in_region_fraction = trace.in_region_fraction
    return summary


def run_simulate(
    cfg: ExperimentConfig,
    controller: Controller,
    output_dir: Optional[Path] = None,
    cases: Optional[Sequence[SimConfig]] = None,
    label: Optional[str] = None,
    flip: bool = False,
) -> SimulationOutcome:
    """Closed-loop runs for every initial condition and true offset in the config."""
    params = parser.to_params(cfg)
    controller = controller.flipped() if flip else controller
    label = label or controller.designer
    cases = list(cases) if cases is not None else parser.sim_configs(cfg)
    trajectories, summaries = {}, {}
    for case in cases:
        trajectory = simulate(controller, case, params)
        trace = None
        if len(trajectory):
            trace = pole_trace(trajectory, controller, params=params, stride=cfg.simulation.pole_stride)
        trajectories[case.name] = trajectory
        summaries[case.name] = _summarize(trajectory, trace)

    outcome = SimulationOutcome(trajectories=trajectories, summaries=summaries, config_hash=parser.config_hash(cfg))
    if output_dir is not None:
        out = Path(output_dir)
        for name, trajectory in trajectories.items():
            path = parser.write_csv(out / f"trajectory_{label}_{name}.csv", trajectory.to_frame())
            outcome.artifacts.append(str(path))
        summary = dict(outcome.to_dict(), designer=label, seed=controller.seed)
        outcome.artifacts.append(str(parser.write_json(out / f"summary_{label}.json", summary)))
    return outcome


# ----------------------------
# analyze
# ----------------------------
@dataclass
class AnalysisOutcome:
    traces: Dict[str, PoleTrace]
    violation: Optional[ViolationEstimate]
    report: Dict[str, Any]
    artifacts: List[str] = field(default_factory=list)


def run_analyze(
    cfg: ExperimentConfig,
    controller: Controller,
    trajectories: Dict[str, Trajectory],
    output_dir: Optional[Path] = None,
    label: Optional[str] = None,
    violation_samples: Optional[int] = None,
    workers: Optional[int] = None,
) -> AnalysisOutcome:
    """Pole traces along each trajectory plus a Monte Carlo violation estimate on the operating box."""
    if not trajectories:
        raise DomainError("analysis needs at least one trajectory")
    params = parser.to_params(cfg)
    label = label or controller.designer
    traces: Dict[str, PoleTrace] = {}
    cases: Dict[str, Any] = {}
    for name, trajectory in trajectories.items():
        if not len(trajectory):
            logger.warning("trajectory %s is empty, no pole trace", name)
            continue
        trace = pole_trace(trajectory, controller, params=params, stride=cfg.simulation.pole_stride)
        traces[name] = trace
        cases[name] = {
            "samples": len(trace),
            "skipped": trace.skipped,
            "in_region_fraction": trace.in_region_fraction,
            "dispersion": trace.dispersion(),
            "worst_margin": trace.worst_margin,
        }

    M = cfg.design.violation_samples if violation_samples is None else violation_samples
    violation = None
    if M > 0:
        violation = _estimate_violation(cfg, controller, params, M, workers)
    fractions = [c["in_region_fraction"] for c in cases.values()]
    report = {
        "designer": label,
        "seed": controller.seed,
        "config_hash": parser.config_hash(cfg),
        "region": controller.region.to_dict(),
        "cases": cases,
        "worst_in_region_fraction": float(np.min(fractions)) if fractions else None,
        "max_dispersion": float(max(c["dispersion"] for c in cases.values())) if cases else None,
        "violation": violation.model_dump(mode="json") if violation is not None else None,
    }
    outcome = AnalysisOutcome(traces=traces, violation=violation, report=report)
    if output_dir is not None:
        out = Path(output_dir)
        for name, trace in traces.items():
            outcome.artifacts.append(str(parser.write_csv(out / f"poles_{label}_{name}.csv", trace.to_frame())))
        outcome.artifacts.append(str(parser.write_json(out / f"analysis_{label}.json", report)))
    return outcome


def load_trajectories(output_dir: Path, label: str) -> Dict[str, Trajectory]:
    """Trajectories written by run_simulate for ``label``, rebuilt with the offsets from its summary."""
    out = Path(output_dir)
    summary = parser.read_json(out / f"summary_{label}.json")
    trajectories = {}
    for name, case in summary["cases"].items():
        frame = parser.read_csv(out / f"trajectory_{label}_{name}.csv")
        if frame.empty:
            continue
        trajectories[name] = Trajectory.from_frame(
            frame, delta_true=case["delta_true"], delta_hat=case["delta_hat"], reason=case["reason"], name=name
        )
    return trajectories
