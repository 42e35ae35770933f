import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import uvicorn

from src import experiments
from src.control.linearization import decision_variable_count
from src.errors import EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, GraspScpError
from src.settings import configure_logging, get_settings
from src.utils import parser

logger = logging.getLogger(__name__)


def _output_dir(args, cfg) -> Path:
    return Path(args.output_dir or cfg.output_dir or get_settings().output_dir)


def _emit(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_sample_size(args) -> int:
    result = experiments.run_sample_size(args.eps, args.beta, args.d, args.n_xi, args.L_xi, args.max_samples)
    rows = [f"{key:>14}  {result[key]}" for key in sorted(result)]
    print("\n".join(rows))
    return EXIT_OK


def cmd_design(args) -> int:
    cfg = parser.load_config(args.config)
    outcome = experiments.run_design(cfg, args.designer, _output_dir(args, cfg), args.solver, args.workers)
    _emit({"designer": outcome.designer, "certificate": outcome.certificate(), "artifacts": outcome.artifacts})
    if not outcome.feasible:
        logger.error("%s design not feasible: %s", outcome.designer, outcome.result.certificate.message or outcome.result.status.value)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = parser.load_config(args.config)
    controller = experiments.load_controller(args.controller)
    outcome = experiments.run_simulate(cfg, controller, _output_dir(args, cfg), label=args.label, flip=args.flip)
    _emit(dict(outcome.to_dict(), artifacts=outcome.artifacts))
    if outcome.diverged:
        logger.warning("simulation stopped early: %s", ", ".join(outcome.failed_cases))
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = parser.load_config(args.config)
    controller = experiments.load_controller(args.controller)
    out = _output_dir(args, cfg)
    label = args.label or controller.designer
    trajectories = experiments.load_trajectories(Path(args.trajectories or out), label)
    outcome = experiments.run_analyze(
        cfg, controller, trajectories, out, label=label, violation_samples=args.violation_samples, workers=args.workers
    )
    _emit(dict(outcome.report, artifacts=outcome.artifacts))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from src.pipeline.graph import run_pipeline

    cfg = parser.load_config(args.config)
    state = run_pipeline(cfg, _output_dir(args, cfg), designers=args.designers, solver=args.solver)
    _emit(state["summary"])
    return EXIT_OK


def cmd_serve(args) -> int:
    settings = get_settings()
    uvicorn.run("src.app:app", host=args.host or settings.host, port=args.port or settings.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graspscp", description="Scenario-based robust grasp motion control synthesis")
    ap.add_argument("--log-level", default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-size", help="scenario sample size for given eps, beta, d")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--d", type=int, default=decision_variable_count())
    p.add_argument("--n-xi", dest="n_xi", type=int, default=None)
    p.add_argument("--L-xi", dest="L_xi", type=float, default=None)
    p.add_argument("--max-samples", type=int, default=None)
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("design", help="design a controller and write controller and certificate JSON")
    p.add_argument("--config", default=None)
    p.add_argument("--designer", choices=["grid", "feasibility", "optimality"], default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--solver", choices=["clarabel", "scs", "reference"], default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="closed-loop simulation of a controller file")
    p.add_argument("--config", default=None)
    p.add_argument("--controller", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--label", default=None)
    p.add_argument("--flip", action="store_true", help="negate the gain (instability check)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="pole traces and violation report for simulated trajectories")
    p.add_argument("--config", default=None)
    p.add_argument("--controller", required=True)
    p.add_argument("--trajectories", default=None, help="directory holding the simulate artifacts")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--label", default=None)
    p.add_argument("--violation-samples", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pipeline", help="design, simulate and analyze every designer")
    p.add_argument("--config", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--designers", nargs="+", choices=["grid", "feasibility", "optimality"], default=None)
    p.add_argument("--solver", choices=["clarabel", "scs", "reference"], default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except GraspScpError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except KeyboardInterrupt:
        logger.info("interrupted")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
