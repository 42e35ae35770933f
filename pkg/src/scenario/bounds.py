"""Exact sample sizes for scenario programs and Lipschitz constants of the LMI blocks."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from scipy.stats import binom

from src.errors import DomainError

logger = logging.getLogger(__name__)

DEGENERATE_CLAMP = 1.0 - 1e-9
# largest N the binomial search evaluates; scipy needs int64 trial counts
SAMPLE_LIMIT = 2**60


def binomial_tail(N: int, eps: float, d: int) -> float:
    """P[Bin(N, eps) <= d - 1], the confidence complement of a scenario design.

    scipy evaluates the binomial CDF through the regularized incomplete beta
    function, which stays accurate for N in the 1e5 range.
    """
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps must lie in [0, 1], got {eps}")
    if d < 1:
        raise DomainError(f"d must be at least 1, got {d}")
    return float(binom.cdf(d - 1, int(N), eps))


def _check_probability(value: float, name: str, closed_right: bool = False) -> None:
    upper_ok = value <= 1.0 if closed_right else value < 1.0
    if not (value > 0.0 and upper_ok):
        interval = "(0, 1]" if closed_right else "(0, 1)"
        raise DomainError(f"{name} must lie in {interval}, got {value}")


def _minimal_samples(eps: float, beta: float, d: int) -> Optional[int]:
    """Exact minimal N, or None when it exceeds SAMPLE_LIMIT."""
    if binomial_tail(1, eps, d) <= beta:
        return 1
    lo, hi = 1, max(d, 2)
    while binomial_tail(hi, eps, d) > beta:
        if hi >= SAMPLE_LIMIT:
            return None
        lo, hi = hi, min(2 * hi, SAMPLE_LIMIT)
    # invariant: tail(lo) > beta >= tail(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binomial_tail(mid, eps, d) > beta:
            lo = mid
        else:
            hi = mid
    return hi


def explicit_sample_bound(eps: float, beta: float, d: int) -> int:
    """Closed-form N >= (2/eps) (ln(1/beta) + d); always satisfies the binomial condition."""
    return math.ceil(2.0 / eps * (math.log(1.0 / beta) + d))


def sample_size_feasibility(eps: float, beta: float, d: int) -> int:
    """Smallest N with binomial_tail(N, eps, d) <= beta."""
    _check_probability(eps, "eps")
    _check_probability(beta, "beta")
    if d < 1:
        raise DomainError(f"d must be at least 1, got {d}")
    exact = _minimal_samples(eps, beta, d)
    if exact is None:
        logger.warning("exact sample size exceeds %d, reporting the closed-form bound", SAMPLE_LIMIT)
        return explicit_sample_bound(eps, beta, d)
    return exact


@dataclass(frozen=True)
class LipschitzConstants:
    decay: float
    disk: float
    cone: float
    overall: float

    def as_tuple(self):
        return (self.decay, self.disk, self.cone, self.overall)


def lipschitz_lmi(mu: float, theta: float, L_A: float, L_B: float) -> LipschitzConstants:
    """Lipschitz constants in xi of the three region blocks for ||P||, ||Y|| <= mu."""
    if mu <= 0.0:
        raise DomainError(f"mu must be positive, got {mu}")
    if L_A < 0.0 or L_B < 0.0:
        raise DomainError("dynamics Lipschitz constants must be non-negative")
    if not 0.0 <= theta <= 0.5 * math.pi:
        raise DomainError(f"theta must lie in [0, pi/2], got {theta}")
    base = 2.0 * mu * (L_A + L_B)
    trig = abs(math.sin(theta)) + abs(math.cos(theta))
    return LipschitzConstants(decay=base, disk=0.5 * base, cone=base * trig, overall=base * max(1.0, trig))


def aggregate_lipschitz(constants: Sequence[float], mode: str = "max") -> float:
    values = [float(c) for c in constants]
    if not values or any(v <= 0.0 for v in values):
        raise DomainError("per-block Lipschitz constants must be positive")
    if mode == "max":
        return max(values)
    if mode == "sum":
        return sum(values)
    raise DomainError(f"unknown Lipschitz aggregation {mode!r}; use 'max' or 'sum'")


@dataclass(frozen=True)
class OptimalitySampleSize:
    required_samples: int
    used_samples: int
    tightening: float
    eps_effective: float
    degenerate: bool
    truncated: bool
    exact: bool = True

    def to_dict(self):
        return asdict(self)


def sample_size_optimality(
    eps: float, beta: float, n_xi: int, L_xi: float, d: int, max_samples: Optional[int] = None
) -> OptimalitySampleSize:
    """Sample size and constraint tightening that make the scenario optimum approximate the robust one."""
    _check_probability(eps, "eps", closed_right=True)
    _check_probability(beta, "beta", closed_right=True)
    if L_xi <= 0.0:
        raise DomainError(f"L_xi must be positive, got {L_xi}")
    if n_xi < 1:
        raise DomainError(f"n_xi must be at least 1, got {n_xi}")
    if d < 1:
        raise DomainError(f"d must be at least 1, got {d}")
    ratio = eps / L_xi
    degenerate = ratio >= 1.0
    eps_effective = min(ratio**n_xi, DEGENERATE_CLAMP)
    if eps_effective <= 0.0:
        raise DomainError(f"(eps/L_xi)^n_xi underflows for eps={eps}, L_xi={L_xi}, n_xi={n_xi}")
    if degenerate:
        logger.warning("eps/L_xi = %.4g >= 1: sample size computed for clamped probability %.9g", ratio, eps_effective)
    required = _minimal_samples(eps_effective, beta, d)
    exact = required is not None
    if not exact:
        required = explicit_sample_bound(eps_effective, beta, d)
        logger.warning("exact sample size exceeds %d, using the closed-form bound %d", SAMPLE_LIMIT, required)
    used = required
    truncated = max_samples is not None and required > max_samples
    if truncated:
        used = int(max_samples)
        logger.warning("required %d samples, truncated to %d", required, used)
    return OptimalitySampleSize(
        required_samples=required,
        used_samples=used,
        tightening=L_xi * eps ** (1.0 / n_xi),
        eps_effective=eps_effective,
        degenerate=degenerate,
        truncated=truncated,
        exact=exact,
    )
