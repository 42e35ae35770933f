"""Experiment workflow: design every controller, simulate the test cases, analyze, summarize."""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from src import experiments
from src.config import ExperimentConfig
from src.errors import GraspScpError
from src.utils import parser

logger = logging.getLogger(__name__)

DESIGNERS = ["grid", "feasibility", "optimality"]


class ExperimentState(TypedDict, total=False):
    config: ExperimentConfig
    output_dir: Optional[str]
    designers: List[str]
    solver: Optional[str]
    designs: Dict[str, Any]
    simulations: Dict[str, Any]
    analyses: Dict[str, Any]
    errors: Dict[str, str]
    summary: Dict[str, Any]


def _out(state: ExperimentState) -> Optional[Path]:
    return Path(state["output_dir"]) if state.get("output_dir") else None


def design_controllers_node(state: ExperimentState) -> ExperimentState:
    designs, errors = {}, dict(state.get("errors", {}))
    for designer in state.get("designers") or DESIGNERS:
        try:
            designs[designer] = experiments.run_design(state["config"], designer, _out(state), state.get("solver"))
        except GraspScpError as exc:
            logger.error("design %s failed: %s", designer, exc)
            errors[designer] = str(exc)
    return {"designs": designs, "errors": errors}


def has_controllers(state: ExperimentState) -> str:
    return "simulate" if any(d.feasible for d in state.get("designs", {}).values()) else "summarize"


def simulate_cases_node(state: ExperimentState) -> ExperimentState:
    simulations = {}
    for designer, outcome in state["designs"].items():
        if not outcome.feasible:
            continue
        simulations[designer] = experiments.run_simulate(state["config"], outcome.controller, _out(state), label=designer)
    return {"simulations": simulations}


def analyze_results_node(state: ExperimentState) -> ExperimentState:
    analyses = {}
    for designer, sims in state.get("simulations", {}).items():
        controller = state["designs"][designer].controller
        trajectories = {name: t for name, t in sims.trajectories.items() if len(t)}
        if not trajectories:
            continue
        # the design step already estimated the violation rate on the same box
        analyses[designer] = experiments.run_analyze(
            state["config"], controller, trajectories, _out(state), label=designer, violation_samples=0
        ).report
    return {"analyses": analyses}


def summarize_node(state: ExperimentState) -> ExperimentState:
    cfg = state["config"]
    designers = {}
    for designer, outcome in state.get("designs", {}).items():
        entry = {"status": outcome.result.status.value, "certificate": outcome.certificate()}
        sims = state.get("simulations", {}).get(designer)
        if sims is not None:
            entry["cases"] = {
                name: {
                    "reason": s.reason,
                    "converged": s.converged,
                    "final_position_error": s.final_position_error,
                    "final_orientation_error": s.final_orientation_error,
                    "min_cone_margin": s.min_cone_margin,
                }
                for name, s in sims.summaries.items()
            }
        analysis = state.get("analyses", {}).get(designer)
        if analysis is not None:
            entry["worst_in_region_fraction"] = analysis["worst_in_region_fraction"]
            entry["max_dispersion"] = analysis["max_dispersion"]
        designers[designer] = entry
    summary = {"config_hash": parser.config_hash(cfg), "designers": designers, "errors": state.get("errors", {})}
    if _out(state) is not None:
        parser.write_json(_out(state) / "pipeline_summary.json", summary)
    return {"summary": summary}


graph = StateGraph(ExperimentState)
graph.add_node("design_controllers", design_controllers_node)
graph.add_node("simulate_cases", simulate_cases_node)
graph.add_node("analyze_results", analyze_results_node)
graph.add_node("summarize", summarize_node)
graph.set_entry_point("design_controllers")
graph.add_conditional_edges("design_controllers", has_controllers, {"simulate": "simulate_cases", "summarize": "summarize"})
graph.add_edge("simulate_cases", "analyze_results")
graph.add_edge("analyze_results", "summarize")
graph.add_edge("summarize", END)
experiment_workflow = graph.compile()


def run_pipeline(
    cfg: ExperimentConfig,
    output_dir: Optional[Path] = None,
    designers: Optional[List[str]] = None,
    solver: Optional[str] = None,
) -> ExperimentState:
    initial: ExperimentState = {
        "config": cfg,
        "output_dir": str(output_dir) if output_dir is not None else None,
        "designers": list(designers or DESIGNERS),
        "solver": solver,
        "designs": {},
        "simulations": {},
        "analyses": {},
        "errors": {},
    }
    return experiment_workflow.invoke(initial)
