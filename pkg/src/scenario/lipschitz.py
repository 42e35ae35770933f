import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from src.control.linearization import augment, linearize
from src.errors import DomainError, SingularityError, UnreachableError
from src.model.params import HandObjectParams
from src.scenario.box import Scenario, UncertaintyBox, sample_box
from src.scenario.rng import ScenarioRng
from src.settings import get_settings

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.5

PlantFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class DynamicsLipschitz:
    L_A: float
    L_B: float
    raw_A: float
    raw_B: float
    pairs: int
    skipped_singular: int
    skipped_coincident: int
    safety_factor: float = SAFETY_FACTOR

    def to_dict(self):
        return asdict(self)


def default_plant_fn(box: UncertaintyBox, params: HandObjectParams, delta_hat: float = 0.0) -> PlantFn:
    def plant(values: np.ndarray):
        op = Scenario(index=-1, values=values).operating_point(box, params, delta_hat)
        aug = augment(linearize(op, params))
        return aug.A, aug.B

    return plant


def estimate_dynamics_lipschitz(
    box: UncertaintyBox,
    K: int,
    seed: int,
    params: Optional[HandObjectParams] = None,
    plant_fn: Optional[PlantFn] = None,
    delta_hat: float = 0.0,
    safety_factor: float = SAFETY_FACTOR,
    workers: Optional[int] = None,
) -> DynamicsLipschitz:
    """Largest observed slope of the augmented (A, B) over K random scenario pairs, times a safety factor.

    Pairs are drawn one after another from a single stream, so the first K
    pairs of a larger run are exactly the pairs of a smaller one.
    """
    if K < 2:
        raise DomainError(f"K must be at least 2, got {K}")
    if plant_fn is None:
        if params is None:
            raise DomainError("params are required when no plant function is given")
        plant_fn = default_plant_fn(box, params, delta_hat)

    generator = ScenarioRng(seed).stream("lipschitz")
    pairs = [(sample_box(box, 1, generator)[0], sample_box(box, 1, generator)[0]) for _ in range(K)]
    mask = box.free_mask

    def evaluate(pair):
        a, b = pair
        distance = float(np.linalg.norm(a[mask] - b[mask]))
        if distance == 0.0:
            return "coincident"
        try:
            A1, B1 = plant_fn(a)
            A2, B2 = plant_fn(b)
        except (SingularityError, UnreachableError) as exc:
            logger.debug("skipping pair: %s", exc)
            return "singular"
        return (
            float(np.linalg.norm(A1 - A2, 2)) / distance,
            float(np.linalg.norm(B1 - B2, 2)) / distance,
        )

    workers = workers or get_settings().workers
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(evaluate, pairs))

    slopes = [r for r in results if isinstance(r, tuple)]
    singular = sum(1 for r in results if r == "singular")
    coincident = sum(1 for r in results if r == "coincident")
    if singular:
        logger.warning("Lipschitz estimate skipped %d singular pairs of %d", singular, K)
    raw_A = max((s[0] for s in slopes), default=0.0)
    raw_B = max((s[1] for s in slopes), default=0.0)
    result = DynamicsLipschitz(
        L_A=safety_factor * raw_A,
        L_B=safety_factor * raw_B,
        raw_A=raw_A,
        raw_B=raw_B,
        pairs=K,
        skipped_singular=singular,
        skipped_coincident=coincident,
        safety_factor=safety_factor,
    )
    logger.info("Lipschitz estimate over %d pairs: L_A=%.4g L_B=%.4g", K, result.L_A, result.L_B)
    return result
