"""Reference log-det barrier method for small LMI problems.

A phase-I problem

    minimize s  subject to  F_k(x) - s I <= 0,  bounds relaxed by s,  s >= -1

finds a strictly feasible start; if its optimum stays non-negative the
problem is reported infeasible.
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, solve_triangular

from src.sdp.problem import SdpProblem, SdpSolution, SdpStatus

logger = logging.getLogger(__name__)

PHASE1_FLOOR = -1.0
UNBOUNDED_NORM = 1e10


@dataclass
class _Block:
    F0: np.ndarray
    Fi: np.ndarray  # (n_vars, d, d)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.Fi, axes=1)


@dataclass
class _Barrier:
    """LMI blocks F_k(x) < 0 plus scalar rows G x + h < 0."""

    blocks: List[_Block]
    G: np.ndarray
    h: np.ndarray

    @property
    def degree(self) -> int:
        return sum(b.F0.shape[0] for b in self.blocks) + self.h.size

    def max_violation(self, x: np.ndarray) -> float:
        worst = max((float(np.linalg.eigvalsh(b.value(x))[-1]) for b in self.blocks), default=-np.inf)
        if self.h.size:
            worst = max(worst, float((self.G @ x + self.h).max()))
        return worst

    def lifted(self) -> "_Barrier":
        """Phase-I barrier over (x, s)."""
        blocks = []
        for b in self.blocks:
            d = b.F0.shape[0]
            blocks.append(_Block(F0=b.F0, Fi=np.concatenate([b.Fi, -np.eye(d)[None]], axis=0)))
        n = self.G.shape[1]
        G = np.hstack([self.G, -np.ones((self.h.size, 1))])
        floor = np.zeros((1, n + 1))
        floor[0, -1] = -1.0
        return _Barrier(blocks=blocks, G=np.vstack([G, floor]), h=np.append(self.h, PHASE1_FLOOR))

    def terms(self, x: np.ndarray, need_hessian: bool = True):
        """Value, gradient and Hessian of the barrier; None outside the interior."""
        n = x.size
        value = 0.0
        grad = np.zeros(n)
        hess = np.zeros((n, n)) if need_hessian else None
        if self.h.size:
            slack = -(self.G @ x + self.h)
            if np.any(slack <= 0.0):
                return None
            value -= float(np.sum(np.log(slack)))
            inv = 1.0 / slack
            grad += self.G.T @ inv
            if need_hessian:
                hess += (self.G * inv[:, None] ** 2).T @ self.G
        for b in self.blocks:
            S = -b.value(x)
            try:
                L = cholesky(0.5 * (S + S.T), lower=True)
            except LinAlgError:
                return None
            value -= 2.0 * float(np.sum(np.log(np.diag(L))))
            d = L.shape[0]
            # L^-1 F_i L^-T for every i, stacked side by side
            left = solve_triangular(L, b.Fi.transpose(1, 0, 2).reshape(d, n * d), lower=True)
            left_t = left.reshape(d, n, d).transpose(2, 1, 0).reshape(d, n * d)
            scaled = solve_triangular(L, left_t, lower=True).reshape(d, n, d).transpose(1, 0, 2)
            grad += np.trace(scaled, axis1=1, axis2=2)
            if need_hessian:
                flat = scaled.reshape(n, d * d)
                hess += flat @ flat.T
        return value, grad, hess


def _build_barrier(problem: SdpProblem, box_radius: float) -> _Barrier:
    n = problem.n_vars
    blocks = []
    for con in problem.constraints:
        Fi = np.stack([con.coefficient(i) for i in range(n)])
        blocks.append(_Block(F0=con.F0, Fi=0.5 * (Fi + Fi.transpose(0, 2, 1))))
    lb = np.where(np.isfinite(problem.lb), problem.lb, -box_radius)
    ub = np.where(np.isfinite(problem.ub), problem.ub, box_radius)
    eye = np.eye(n)
    return _Barrier(blocks=blocks, G=np.vstack([-eye, eye]), h=np.concatenate([lb, -ub]))


def _barrier_path(
    c: np.ndarray,
    barrier: _Barrier,
    x0: np.ndarray,
    tol_gap: float,
    max_iter: int,
    stop_index: Optional[int] = None,
) -> Tuple[np.ndarray, int, bool, str]:
    """Follow the central path from a strictly feasible x0 with damped Newton steps.

    With ``stop_index`` set, return as soon as that coordinate turns negative.
    """
    x = x0.copy()
    m = barrier.degree
    t = 1.0
    steps = 0
    while True:
        while True:
            terms = barrier.terms(x)
            if terms is None:
                return x, steps, False, "iterate left the interior"
            phi, g_bar, H = terms
            g = t * c + g_bar
            ridge = 1e-14 * max(float(np.trace(H)) / x.size, 1.0)
            try:
                dx = -cho_solve(cho_factor(H + ridge * np.eye(x.size)), g)
            except LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            decrement = float(-g @ dx)
            if decrement <= 1e-10:
                break
            f_now = t * float(c @ x) + phi
            step = 1.0
            while True:
                trial = x + step * dx
                trial_terms = barrier.terms(trial, need_hessian=False)
                if trial_terms is not None and t * float(c @ trial) + trial_terms[0] <= f_now - 0.25 * step * decrement:
                    break
                step *= 0.5
                if step < 1e-14:
                    return x, steps, False, "line search stalled"
            x = trial
            steps += 1
            if stop_index is not None and x[stop_index] < 0.0:
                return x, steps, True, "strictly feasible point found"
            if np.linalg.norm(x) > UNBOUNDED_NORM:
                return x, steps, False, "unbounded"
            if steps >= max_iter:
                return x, steps, False, "iteration limit reached"
        if m / t <= tol_gap * max(1.0, abs(float(c @ x))):
            return x, steps, True, "converged"
        t *= 10.0


class BarrierSdpSolver:
    """Small dense path-following solver used to cross-check the conic backend."""

    name = "reference"

    def __init__(self, box_radius: float = 1e6):
        self.box_radius = box_radius

    def _strict_start(self, barrier: _Barrier, n: int, tol_gap: float, max_iter: int):
        x0 = np.zeros(n)
        if barrier.terms(x0, need_hessian=False) is not None:
            return x0, 0, True, ""
        lifted = barrier.lifted()
        z0 = np.append(x0, max(barrier.max_violation(x0), 0.0) + 1.0)
        c = np.zeros(n + 1)
        c[-1] = 1.0
        z, steps, ok, message = _barrier_path(c, lifted, z0, tol_gap, max_iter, stop_index=n)
        if ok and z[-1] < 0.0:
            return z[:n], steps, True, ""
        # phase-I optimum s* >= 0: no strictly feasible point exists
        certified = ok or message == "line search stalled"
        return None, steps, certified, f"phase I stopped at s={z[-1]:.3g} ({message})"

    def solve(self, problem: SdpProblem, tol_feas: float, tol_gap: float, max_iter: int) -> SdpSolution:
        started = time.perf_counter()
        barrier = _build_barrier(problem, self.box_radius)
        n = problem.n_vars
        x0, phase1_steps, certified, message = self._strict_start(barrier, n, tol_gap, max_iter)
        if x0 is None:
            logger.info("reference solver: %s", message)
            return SdpSolution(
                x=None,
                objective=float("nan"),
                status=SdpStatus.INFEASIBLE if certified else SdpStatus.NUMERICAL_FAILURE,
                primal_residual=float("nan"),
                solve_time=time.perf_counter() - started,
                iterations=phase1_steps,
                backend=self.name,
                message=message,
            )
        x, steps, ok, message = _barrier_path(problem.c, barrier, x0, tol_gap, max_iter)
        open_coords = ~(np.isfinite(problem.lb) & np.isfinite(problem.ub))
        if ok and np.any(np.abs(x[open_coords]) > 0.99 * self.box_radius):
            ok, message = False, "unbounded"
        if ok:
            status = SdpStatus.OPTIMAL
        elif message == "unbounded":
            status = SdpStatus.UNBOUNDED
        else:
            status = SdpStatus.NUMERICAL_FAILURE
        return SdpSolution(
            x=x,
            objective=float(problem.c @ x),
            status=status,
            primal_residual=float("nan"),
            solve_time=time.perf_counter() - started,
            iterations=phase1_steps + steps,
            backend=self.name,
            message=message,
        )
