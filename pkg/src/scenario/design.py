"""Scenario designs: one shared Lyapunov certificate for many sampled plants."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.control.linearization import AffinePlant, decision_variable_count, linearize
from src.control.lmi import (
    GAMMA_CEILING,
    GAMMA_FLOOR,
    STRICTNESS,
    Controller,
    DecisionVars,
    DRegion,
    ScpOptions,
    design_lmi_problem,
    evaluate_constraint,
)
from src.errors import DomainError, SingularityError, UnreachableError
from src.model.params import HandObjectParams
from src.scenario.bounds import (
    OptimalitySampleSize,
    aggregate_lipschitz,
    lipschitz_lmi,
    sample_size_feasibility,
    sample_size_optimality,
)
from src.scenario.box import ScenarioSet, UncertaintyBox, delta_grid_scenarios
from src.scenario.certificates import FeasibilityCertificate, OptimalityCertificate
from src.sdp import SdpSolution, SdpStatus, solve
from src.settings import get_settings

logger = logging.getLogger(__name__)


@dataclass
class DesignOptions:
    eta: float = STRICTNESS
    gamma_floor: float = GAMMA_FLOOR
    gamma_ceiling: float = GAMMA_CEILING
    solver: Optional[str] = None
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: Optional[int] = None
    workers: Optional[int] = None


@dataclass(frozen=True)
class OptimalityConfig:
    eps: float
    beta: float
    mu: float
    lipschitz_blocks: Tuple[float, ...]
    n_xi: int
    aggregation: str = "max"
    max_samples: Optional[int] = None
    L_A: Optional[float] = None
    L_B: Optional[float] = None

    def __post_init__(self):
        if self.mu <= 0.0:
            raise DomainError(f"mu must be positive, got {self.mu}")

    @classmethod
    def from_dynamics(
        cls, eps: float, beta: float, mu: float, theta: float, L_A: float, L_B: float, n_xi: int, **kwargs
    ) -> "OptimalityConfig":
        """Per-block constants derived from Lipschitz constants of the plant matrices."""
        lc = lipschitz_lmi(mu, theta, L_A, L_B)
        return cls(
            eps=eps, beta=beta, mu=mu, lipschitz_blocks=(lc.decay, lc.disk, lc.cone), n_xi=n_xi,
            L_A=L_A, L_B=L_B, **kwargs,
        )

    @property
    def L_xi(self) -> float:
        return aggregate_lipschitz(self.lipschitz_blocks, self.aggregation)

    @property
    def tightening(self) -> float:
        return self.L_xi * self.eps ** (1.0 / self.n_xi)

    def sample_size(self, d: int) -> OptimalitySampleSize:
        return sample_size_optimality(self.eps, self.beta, self.n_xi, self.L_xi, d, self.max_samples)


@dataclass
class DesignResult:
    status: SdpStatus
    controller: Optional[Controller]
    certificate: FeasibilityCertificate
    solution: SdpSolution
    plants: List[AffinePlant] = field(default_factory=list, repr=False)
    training_margins: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.status == SdpStatus.OPTIMAL and self.controller is not None


def linearize_scenarios(
    scenarios: ScenarioSet, params: HandObjectParams, delta_hat: float = 0.0, workers: Optional[int] = None
) -> Tuple[List[AffinePlant], List[int]]:
    """Linearize every scenario; results come back in scenario order, singular ones skipped."""

    def one(scenario):
        try:
            return linearize(scenario.operating_point(scenarios.box, params, delta_hat), params)
        except (SingularityError, UnreachableError) as exc:
            logger.warning("scenario %d skipped: %s", scenario.index, exc)
            return None

    workers = workers or get_settings().workers
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, scenarios.scenarios))
    plants = [p for p in results if p is not None]
    skipped = [s.index for s, p in zip(scenarios.scenarios, results) if p is None]
    return plants, skipped


def training_margins(controller: Controller, plants: Sequence[AffinePlant]) -> np.ndarray:
    """Worst block margin of the controller's certificate on each plant."""
    return np.array([float(evaluate_constraint(controller.vars, p.A, p.B, controller.region).max()) for p in plants])


def input_scaling(plants: Sequence[AffinePlant]) -> np.ndarray:
    """Right factor D with mean(B) D close to [0; I], or I when the lower block is not square-invertible.

    Designing on (A, B D) and mapping Y back as D Y leaves every LMI block unchanged.
    """
    B_mean = np.mean([np.atleast_2d(p.B) for p in plants], axis=0)
    n_x, n_u = B_mean.shape
    if n_x < 2 * n_u:
        return np.eye(n_u)
    lower = B_mean[-n_u:, :]
    if np.linalg.cond(lower) > 1e12:
        return np.eye(n_u)
    return np.linalg.inv(lower)


def design_for_plants(
    plants: Sequence[AffinePlant],
    region: DRegion,
    options: Optional[DesignOptions] = None,
    tightening: float = 0.0,
    mu: Optional[float] = None,
    designer: str = "feasibility",
    seed: Optional[int] = None,
) -> Tuple[SdpSolution, Optional[Controller]]:
    options = options or DesignOptions()
    if not plants:
        raise DomainError("no linearizable scenarios to design for")
    if region.is_empty:
        # no pole satisfies Re < -alpha and |s| < r at once
        logger.warning("pole region is empty (alpha=%.4g >= r=%.4g)", region.alpha, region.radius)
        return (
            SdpSolution(
                x=None, objective=float("nan"), status=SdpStatus.INFEASIBLE, primal_residual=float("nan"),
                solve_time=0.0, backend="none", message="empty pole region",
            ),
            None,
        )
    # the norm bounds of the optimality program act on Y itself
    scaling = input_scaling(plants) if mu is None else np.eye(np.atleast_2d(plants[0].B).shape[1])
    problem, layout = design_lmi_problem(
        [(p.A, np.atleast_2d(p.B) @ scaling) for p in plants],
        region,
        ScpOptions(
            eta=options.eta,
            gamma_floor=options.gamma_floor,
            gamma_ceiling=options.gamma_ceiling,
            tightening=tightening,
            mu=mu,
        ),
    )
    logger.info(
        "solving %s SCP: %d plants, %d LMI blocks, %d variables",
        designer, len(plants), len(problem.constraints), problem.n_vars,
    )
    solution = solve(problem, options.tol_feas, options.tol_gap, options.max_iter, options.solver)
    controller = None
    if solution.ok:
        scaled = layout.unpack(solution.x)
        vars = DecisionVars(P=scaled.P, Y=scaling @ scaled.Y, gamma=scaled.gamma)
        try:
            controller = Controller.from_vars(vars, region, designer=designer, seed=seed)
        except SingularityError as exc:
            solution.status = SdpStatus.NUMERICAL_FAILURE
            solution.message = str(exc)
    logger.info("%s SCP finished with status %s (gamma=%.6g)", designer, solution.status.value, solution.objective)
    return solution, controller


def _finish(
    designer: str,
    solution: SdpSolution,
    controller: Optional[Controller],
    plants: List[AffinePlant],
    certificate: FeasibilityCertificate,
) -> DesignResult:
    margins = None
    if controller is not None:
        margins = training_margins(controller, plants)
        certificate.gamma = controller.gamma
        certificate.max_training_margin = float(margins.max())
        controller.provenance.update(
            {"designer": designer, "used_samples": certificate.used_samples, "status": solution.status.value}
        )
    certificate.status = solution.status.value
    certificate.solver = solution.backend
    certificate.solver_message = solution.message
    return DesignResult(
        status=solution.status,
        controller=controller,
        certificate=certificate,
        solution=solution,
        plants=plants,
        training_margins=margins,
    )


def solve_feasibility_scp(
    scenarios: ScenarioSet,
    region: DRegion,
    params: HandObjectParams,
    eps: Optional[float] = None,
    beta: Optional[float] = None,
    options: Optional[DesignOptions] = None,
    delta_hat: float = 0.0,
    designer: str = "feasibility",
) -> DesignResult:
    options = options or DesignOptions()
    plants, skipped = linearize_scenarios(scenarios, params, delta_hat, options.workers)
    d = decision_variable_count()
    required = sample_size_feasibility(eps, beta, d) if eps is not None and beta is not None else None
    if required is not None and len(plants) < required:
        logger.warning("only %d usable scenarios, the bound asks for %d", len(plants), required)
    solution, controller = design_for_plants(plants, region, options, designer=designer, seed=scenarios.seed)
    certificate = FeasibilityCertificate(
        designer=designer,
        status=solution.status.value,
        eps=eps,
        beta=beta,
        decision_variables=d,
        required_samples=required,
        used_samples=len(plants),
        seed=scenarios.seed,
        skipped_scenarios=skipped,
    )
    if solution.status == SdpStatus.INFEASIBLE:
        certificate.message = "no common certificate for the sampled plants; relax the region"
    return _finish(designer, solution, controller, plants, certificate)


def solve_optimality_scp(
    scenarios: ScenarioSet,
    region: DRegion,
    params: HandObjectParams,
    cfg: OptimalityConfig,
    options: Optional[DesignOptions] = None,
    delta_hat: float = 0.0,
) -> DesignResult:
    """Tightened SCP with ||P||, ||Y|| <= mu; the returned gamma is the sampled optimum J*_N."""
    if cfg.tightening < 0.0:
        raise DomainError("tightening must be non-negative")
    options = options or DesignOptions()
    d = decision_variable_count()
    sizing = cfg.sample_size(d)
    plants, skipped = linearize_scenarios(scenarios, params, delta_hat, options.workers)
    solution, controller = design_for_plants(
        plants, region, options, tightening=cfg.tightening, mu=cfg.mu, designer="optimality", seed=scenarios.seed
    )
    certificate = OptimalityCertificate(
        designer="optimality",
        status=solution.status.value,
        eps=cfg.eps,
        beta=cfg.beta,
        decision_variables=d,
        required_samples=sizing.required_samples,
        used_samples=len(plants),
        truncated=sizing.truncated or len(plants) < sizing.required_samples,
        seed=scenarios.seed,
        skipped_scenarios=skipped,
        mu=cfg.mu,
        n_xi=cfg.n_xi,
        lipschitz_blocks=list(cfg.lipschitz_blocks),
        lipschitz_aggregate=cfg.L_xi,
        aggregation=cfg.aggregation,
        tightening=cfg.tightening,
        eps_effective=sizing.eps_effective,
        degenerate=sizing.degenerate,
        required_exact=sizing.exact,
    )
    if solution.status == SdpStatus.INFEASIBLE:
        certificate.message = "tightened program infeasible: use a smaller eps or a larger mu"
    return _finish("optimality", solution, controller, plants, certificate)


def solve_grid_baseline(
    deltas: Sequence[float],
    region: DRegion,
    params: HandObjectParams,
    box: UncertaintyBox,
    options: Optional[DesignOptions] = None,
    delta_hat: float = 0.0,
) -> DesignResult:
    """Design on a deterministic grid of delta at the fixed equilibrium, joints by inverse kinematics."""
    grid = delta_grid_scenarios(box.restricted(["delta"]), deltas)
    return solve_feasibility_scp(grid, region, params, options=options, delta_hat=delta_hat, designer="grid")
