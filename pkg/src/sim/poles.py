"""Closed-loop poles along a simulated trajectory."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from src.control.linearization import OperatingPoint, linearize
from src.control.lmi import Controller, DRegion, pole_region_margins
from src.errors import DomainError, SingularityError, UnreachableError
from src.model.params import HandObjectParams
from src.sim.simulator import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class PoleTrace:
    times: np.ndarray
    poles: np.ndarray  # (samples, 6) complex, sorted by real then imaginary part
    inside: np.ndarray
    margins: np.ndarray  # (samples, 6, 3)
    skipped: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def in_region_fraction(self) -> float:
        return float(self.inside.mean()) if len(self) else float("nan")

    @property
    def worst_margin(self) -> float:
        return float(self.margins.max()) if len(self) else float("nan")

    def dispersion(self) -> float:
        """Largest distance between two samples of the same sorted pole over the trace."""
        if len(self) < 2:
            return 0.0
        spread = 0.0
        for k in range(self.poles.shape[1]):
            points = np.column_stack([self.poles[:, k].real, self.poles[:, k].imag])
            spread = max(spread, float(pdist(points).max()))
        return spread

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for t, poles, ok, margins in zip(self.times, self.poles, self.inside, self.margins):
            for k, (p, m) in enumerate(zip(poles, margins)):
                rows.append(
                    {
                        "t": t, "pole": k, "re": p.real, "im": p.imag, "inside": bool(ok),
                        "margin_decay": m[0], "margin_disk": m[1], "margin_cone": m[2],
                    }
                )
        return pd.DataFrame(rows, columns=["t", "pole", "re", "im", "inside", "margin_decay", "margin_disk", "margin_cone"])


def _sorted_poles(A_cl: np.ndarray) -> np.ndarray:
    poles = np.linalg.eigvals(A_cl)
    # snap tiny imaginary parts so conjugate pairs stay adjacent
    poles = np.where(np.abs(poles.imag) < 1e-12, poles.real + 0j, poles)
    return poles[np.lexsort((poles.imag, poles.real))]


def pole_trace(
    trajectory: Trajectory,
    controller: Union[Controller, np.ndarray],
    region: Optional[DRegion] = None,
    params: Optional[HandObjectParams] = None,
    delta_hat: Optional[float] = None,
    stride: int = 50,
) -> PoleTrace:
    """Linearize at every ``stride``-th logged step under the true offset and report eig(A - B L)."""
    if len(trajectory) == 0:
        raise DomainError("pole trace needs a non-empty trajectory")
    if stride < 1:
        raise DomainError(f"stride must be at least 1, got {stride}")
    if isinstance(controller, Controller):
        gain, region = controller.gain, region or controller.region
    else:
        gain = np.asarray(controller, dtype=float)
    if region is None:
        raise DomainError("a region is required when passing a bare gain")
    params = params or HandObjectParams()
    cfg = trajectory.config
    delta_hat = cfg.delta_hat if delta_hat is None else delta_hat

    indices = list(range(0, len(trajectory), stride))
    if indices[-1] != len(trajectory) - 1:
        indices.append(len(trajectory) - 1)
    t, x_o, xd_o, q, tau = trajectory.t, trajectory.x_o, trajectory.xd_o, trajectory.q, trajectory.tau

    times, poles, inside, margins, skipped = [], [], [], [], []
    for i in indices:
        try:
            op = OperatingPoint(x_o=x_o[i], xd_o=xd_o[i], q=q[i], tau=tau[i], delta=cfg.delta_true, delta_hat=delta_hat)
            plant = linearize(op, params)
        except (SingularityError, UnreachableError) as exc:
            logger.warning("pole trace skipped t=%.4f: %s", t[i], exc)
            skipped.append(float(t[i]))
            continue
        p = _sorted_poles(plant.closed_loop(gain))
        m = pole_region_margins(p, region)
        times.append(float(t[i]))
        poles.append(p)
        margins.append(m)
        inside.append(bool(np.all(m < 0.0)))

    if not times:
        return PoleTrace(
            times=np.zeros(0), poles=np.zeros((0, 6), dtype=complex), inside=np.zeros(0, dtype=bool),
            margins=np.zeros((0, 6, 3)), skipped=skipped,
        )
    return PoleTrace(
        times=np.asarray(times), poles=np.vstack(poles), inside=np.asarray(inside),
        margins=np.stack(margins), skipped=skipped,
    )
