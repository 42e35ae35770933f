import logging
from typing import Optional

import numpy as np

from src.errors import ConfigError
from src.sdp.barrier import BarrierSdpSolver
from src.sdp.cvxpy_solver import CvxpySdpSolver
from src.sdp.problem import SdpProblem, SdpSolution, SdpStatus, constraint_scale, max_constraint_eigenvalue
from src.settings import get_settings

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 200
# solver stopping criteria are measured on scaled residuals, the eigenvalue check is not
VERIFY_SLACK = 10.0

_FACTORIES = {
    "clarabel": lambda: CvxpySdpSolver("CLARABEL"),
    "scs": lambda: CvxpySdpSolver("SCS"),
    "reference": BarrierSdpSolver,
}


def available_solvers():
    return sorted(_FACTORIES)


def get_solver(name: Optional[str] = None):
    name = (name or get_settings().solver).lower()
    if name not in _FACTORIES:
        raise ConfigError(f"unknown SDP backend {name!r}; choose one of {available_solvers()}")
    return _FACTORIES[name]()


def solve(
    problem: SdpProblem,
    tol_feas: float = 1e-8,
    tol_gap: float = 1e-8,
    max_iter: Optional[int] = None,
    solver: Optional[str] = None,
) -> SdpSolution:
    """Solve and re-verify the returned point with an independent eigenvalue check.

    An "optimal" answer whose worst block eigenvalue exceeds ``tol_feas``
    (up to VERIFY_SLACK, relative to the magnitude of the constraint matrices) is downgraded to
    numerical-failure, keeping the iterate for diagnostics.
    """
    backend = get_solver(solver)
    default_iter = 50000 if isinstance(backend, CvxpySdpSolver) and backend.solver == "SCS" else DEFAULT_MAX_ITER
    solution = backend.solve(problem, tol_feas, tol_gap, max_iter or default_iter)
    if solution.x is not None:
        residual = max_constraint_eigenvalue(problem, solution.x)
        solution.primal_residual = residual
        allowed = VERIFY_SLACK * tol_feas * constraint_scale(problem, solution.x)
        if solution.status == SdpStatus.OPTIMAL and residual > allowed:
            logger.warning(
                "%s reported optimal but max block eigenvalue %.3g exceeds %.3g", solution.backend, residual, allowed
            )
            solution.status = SdpStatus.NUMERICAL_FAILURE
            solution.message = f"verification failed: max eigenvalue {residual:.3g}"
        if not np.isfinite(solution.objective):
            solution.objective = float(problem.c @ solution.x)
    logger.debug(
        "sdp %s: status=%s objective=%.6g residual=%.3g iterations=%d",
        solution.backend,
        solution.status.value,
        solution.objective,
        solution.primal_residual,
        solution.iterations,
    )
    return solution
