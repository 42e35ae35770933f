import logging
import time

import cvxpy as cp
import numpy as np

from src.sdp.problem import SdpProblem, SdpSolution, SdpStatus

logger = logging.getLogger(__name__)

_STATUS = {
    cp.OPTIMAL: SdpStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SdpStatus.OPTIMAL,
    cp.INFEASIBLE: SdpStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SdpStatus.INFEASIBLE,
    cp.UNBOUNDED: SdpStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SdpStatus.UNBOUNDED,
}


class CvxpySdpSolver:
    """Adapter handing an SdpProblem to a conic solver through cvxpy."""

    def __init__(self, solver: str = "CLARABEL"):
        self.solver = solver.upper()
        self.name = solver.lower()

    def _solver_options(self, tol_feas: float, tol_gap: float, max_iter: int) -> dict:
        if self.solver == cp.CLARABEL:
            return {"tol_feas": tol_feas, "tol_gap_abs": tol_gap, "tol_gap_rel": tol_gap, "max_iter": max_iter}
        if self.solver == cp.SCS:
            return {"eps_abs": tol_feas, "eps_rel": tol_gap, "max_iters": max_iter}
        return {}

    def solve(self, problem: SdpProblem, tol_feas: float, tol_gap: float, max_iter: int) -> SdpSolution:
        x = cp.Variable(problem.n_vars)
        constraints = []
        for con in problem.constraints:
            d = con.size
            E = cp.reshape(con.F @ x, (d, d), order="F") + con.F0
            constraints.append(0.5 * (E + E.T) << 0)
        finite_lb = np.isfinite(problem.lb)
        finite_ub = np.isfinite(problem.ub)
        if finite_lb.any():
            constraints.append(x[finite_lb] >= problem.lb[finite_lb])
        if finite_ub.any():
            constraints.append(x[finite_ub] <= problem.ub[finite_ub])

        prob = cp.Problem(cp.Minimize(problem.c @ x), constraints)
        started = time.perf_counter()
        try:
            prob.solve(solver=self.solver, **self._solver_options(tol_feas, tol_gap, max_iter))
        except (KeyboardInterrupt, SystemExit, GeneratorExit):
            raise
        except BaseException as exc:
            # Rust-backed solvers surface panics as pyo3 PanicException, a BaseException
            logger.warning("%s failed: %s: %s", self.solver, type(exc).__name__, exc)
            return SdpSolution(
                x=None,
                objective=float("nan"),
                status=SdpStatus.NUMERICAL_FAILURE,
                primal_residual=float("nan"),
                solve_time=time.perf_counter() - started,
                backend=self.name,
                message=f"{type(exc).__name__}: {exc}",
            )
        elapsed = time.perf_counter() - started

        status = _STATUS.get(prob.status, SdpStatus.NUMERICAL_FAILURE)
        if prob.status == cp.OPTIMAL_INACCURATE:
            logger.warning("%s returned an inaccurate optimum", self.solver)
        values = None if x.value is None else np.asarray(x.value, dtype=float)
        iterations = 0
        stats = getattr(prob, "solver_stats", None)
        if stats is not None and stats.num_iters is not None:
            iterations = int(stats.num_iters)
        return SdpSolution(
            x=values,
            objective=float(prob.value) if values is not None else float("nan"),
            status=status,
            primal_residual=float("nan"),
            solve_time=elapsed,
            iterations=iterations,
            backend=self.name,
            message=str(prob.status),
        )
