import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from src.control.linearization import linearize
from src.control.lmi import Controller, evaluate_constraint, pole_region_check
from src.errors import DomainError, SingularityError, UnreachableError
from src.model.params import HandObjectParams
from src.scenario.box import Scenario, UncertaintyBox, sample_box
from src.scenario.certificates import ViolationEstimate
from src.scenario.rng import ScenarioRng
from src.settings import get_settings

logger = logging.getLogger(__name__)

# margins up to this value count as satisfied (solver accuracy)
MARGIN_TOLERANCE = 1e-7


def clopper_pearson(violations: int, samples: int, confidence: float = 0.95):
    if samples == 0:
        return 0.0, 1.0
    low, high = proportion_confint(violations, samples, alpha=1.0 - confidence, method="beta")
    return float(np.nan_to_num(low, nan=0.0)), float(np.nan_to_num(high, nan=1.0))


def empirical_violation(
    controller: Controller,
    box: UncertaintyBox,
    M: int,
    seed: int,
    params: HandObjectParams,
    delta_hat: float = 0.0,
    confidence: float = 0.95,
    tolerance: float = MARGIN_TOLERANCE,
    workers: Optional[int] = None,
) -> ViolationEstimate:
    """Fraction of M fresh scenarios on which the controller's LMI certificate fails."""
    if M < 1:
        raise DomainError(f"M must be at least 1, got {M}")
    values = sample_box(box, M, ScenarioRng(seed).stream("violation"))
    scale = max(1.0, float(np.abs(controller.P).max()))

    def check(row):
        scenario = Scenario(index=-1, values=row)
        try:
            plant = linearize(scenario.operating_point(box, params, delta_hat), params)
        except (SingularityError, UnreachableError):
            return None
        lmi_violated = bool(evaluate_constraint(controller.vars, plant.A, plant.B, controller.region).max() > tolerance * scale)
        inside, _ = pole_region_check(plant.closed_loop(controller.gain), controller.region)
        return lmi_violated, not inside

    workers = workers or get_settings().workers
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(check, values))

    evaluated = [r for r in results if r is not None]
    skipped = len(results) - len(evaluated)
    violations = sum(1 for lmi, _ in evaluated if lmi)
    pole_violations = sum(1 for _, pole in evaluated if pole)
    n = len(evaluated)
    low, high = clopper_pearson(violations, n, confidence)
    estimate = ViolationEstimate(
        samples=n,
        violations=violations,
        rate=violations / n if n else 0.0,
        ci_low=low,
        ci_high=high,
        confidence=confidence,
        pole_violations=pole_violations,
        pole_rate=pole_violations / n if n else 0.0,
        skipped=skipped,
        seed=seed,
    )
    logger.info(
        "violation estimate: %d/%d (rate %.4f, CI [%.4f, %.4f]), pole-region violations %d",
        violations, n, estimate.rate, low, high, pole_violations,
    )
    return estimate
