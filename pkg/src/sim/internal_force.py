from dataclasses import dataclass

import numpy as np

CONE_MARGIN = 0.1
TANGENTIAL = (0, 2)
NORMAL = (1, 3)


@dataclass(frozen=True)
class InternalForce:
    lam: float
    contact_risk: bool
    lower: float
    upper: float


def internal_force_policy(
    contact_forces: np.ndarray,
    nullspace: np.ndarray,
    mu: float,
    f_min: float,
    margin: float = CONE_MARGIN,
) -> InternalForce:
    """Smallest squeeze lam >= 0 keeping f + lam*N_G inside shrunken friction cones.

    Every requirement (normal >= f_min, |t| <= mu (1 - margin) n) is a linear
    inequality a*lam + b <= 0 on the scalar lam.
    """
    f = np.asarray(contact_forces, dtype=float)
    n = np.asarray(nullspace, dtype=float)
    mu_eff = max(mu * (1.0 - margin), 0.0)
    rows = []
    for t_idx, n_idx in zip(TANGENTIAL, NORMAL):
        rows.append((-n[n_idx], f_min - f[n_idx]))
        for sign in (1.0, -1.0):
            rows.append((sign * n[t_idx] - mu_eff * n[n_idx], sign * f[t_idx] - mu_eff * f[n_idx]))

    lower, upper = 0.0, np.inf
    risk = False
    for a, b in rows:
        if abs(a) < 1e-15:
            if b > 0.0:
                risk = True
        elif a < 0.0:
            lower = max(lower, -b / a)
        else:
            upper = min(upper, -b / a)
    if lower > upper:
        risk = True
    return InternalForce(lam=float(lower), contact_risk=risk, lower=float(lower), upper=float(upper))


def cone_margins(contact_forces: np.ndarray, mu: float) -> np.ndarray:
    """Per-contact min(mu*n - |t|, n); negative means the contact slips or separates."""
    f = np.asarray(contact_forces, dtype=float)
    return np.array([min(mu * f[n] - abs(f[t]), f[n]) for t, n in zip(TANGENTIAL, NORMAL)])
