"""AR(2) fill-in for series that are published with a lag.

The model is fitted on levels with an intercept and iterated forward, feeding
each forecast back in as the most recent observation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GapError, LengthError, RankError
from .quarterly import Quarter, QuarterlySeries

DEFAULT_MAX_GAP = 2


@dataclass(frozen=True)
class ARModel:
    intercept: float
    phi1: float
    phi2: float
    fit_window: tuple[Quarter, Quarter]
    n_obs: int

    def __post_init__(self) -> None:
        if self.n_obs < 3:
            raise LengthError(f"AR(2) needs at least 3 regression rows, got {self.n_obs}")


def fit_ar2(s: QuarterlySeries) -> ARModel:
    """OLS of ``v[t]`` on ``(1, v[t-1], v[t-2])`` over every usable row of ``s``."""
    v = s.values
    if len(v) < 5:
        raise LengthError(f"series {s.name} has {len(v)} values, AR(2) needs at least 5")
    design = np.column_stack([np.ones(len(v) - 2), v[1:-1], v[:-2]])
    target = v[2:]
    rank = np.linalg.matrix_rank(design)
    if rank < 3:
        what = "constant series" if np.ptp(v) == 0 else "collinear lags"
        raise RankError(
            f"series {s.name}: AR(2) design has rank {rank} < 3 ({what}) over {s.start}..{s.end}"
        )
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return ARModel(float(coef[0]), float(coef[1]), float(coef[2]), (s.start, s.end), len(target))


def forecast_recursive(m: ARModel, tail: Sequence[float], h: int) -> list[float]:
    """``h`` forecasts after ``tail = (v[t-1], v[t])``, oldest first."""
    if h < 1:
        raise LengthError(f"horizon must be positive, got {h}")
    if len(tail) != 2:
        raise LengthError(f"tail must hold the last two observations, got {len(tail)}")
    prev2, prev1 = float(tail[0]), float(tail[1])
    out = []
    for _ in range(h):
        nxt = m.intercept + m.phi1 * prev1 + m.phi2 * prev2
        out.append(nxt)
        prev2, prev1 = prev1, nxt
    return out


def extend_series(
    s: QuarterlySeries,
    through: Quarter,
    m: ARModel,
    max_gap: int = DEFAULT_MAX_GAP,
) -> QuarterlySeries:
    """Append AR forecasts to ``s`` up to ``through``, flagged as estimated."""
    gap = through - s.end
    if gap <= 0:
        return s
    if gap > max_gap:
        raise GapError(
            f"series {s.name} ends {s.end}; filling through {through} needs {gap} quarters, "
            f"max is {max_gap}"
        )
    if len(s) < 2:
        raise LengthError(f"series {s.name} needs two observations to extend")
    fill = forecast_recursive(m, s.values[-2:], gap)
    est = s.estimated + tuple(s.end + k for k in range(1, gap + 1))
    return QuarterlySeries(s.name, s.start, np.concatenate([s.values, fill]), est)
