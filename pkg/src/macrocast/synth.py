"""Synthetic quarterly panels for exercising the pipeline without licensed data.

``linear``
    GDP growth is a linear function of the four-quarter-lagged explanatory
    variables plus Gaussian noise.

``threshold_recession``
    Household debt to GDP follows a 40-quarter credit cycle plus AR(1) noise.
    Growth is ordinary (about 2.8 per cent annualised, mildly linked to rates
    and share prices) except when household debt four quarters earlier is
    above a fixed threshold, when it drops to about -3.5 per cent. Corporate
    and public debt are pure AR(1) noise with no effect on growth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LengthError
from .quarterly import Quarter, QuarterlySeries

SCENARIOS = ("linear", "threshold_recession")
DEFAULT_START = Quarter(1960, 1)
MIN_QUARTERS = 40
BURN_IN = 40

CYCLE_PERIOD = 40
CYCLE_PHASE = 0.0
DEBT_MEAN = 70.0
DEBT_AMPLITUDE = 10.0
DEBT_THRESHOLD = 78.5
NORMAL_GROWTH = 2.8
RECESSION_GROWTH = -3.5
GROWTH_NOISE = 1.0
TRIGGER_LAG = 4


@dataclass(frozen=True)
class SyntheticPanel:
    scenario: str
    seed: int
    series: tuple[QuarterlySeries, ...]
    regime: np.ndarray  # True where the recession rule is active
    description: str

    @property
    def start(self) -> Quarter:
        return self.series[0].start

    def get(self, name: str) -> QuarterlySeries:
        for s in self.series:
            if s.name == name:
                return s
        raise KeyError(name)

    def episodes(self) -> list[tuple[Quarter, Quarter]]:
        """Maximal runs of quarters under the recession rule."""
        out = []
        k = 0
        n = len(self.regime)
        while k < n:
            if self.regime[k]:
                j = k
                while j + 1 < n and self.regime[j + 1]:
                    j += 1
                out.append((self.start + k, self.start + j))
                k = j + 1
            else:
                k += 1
        return out


def _ar1(rng: np.random.Generator, n: int, mean: float, phi: float, sd: float) -> np.ndarray:
    out = np.empty(n)
    level = mean
    for t in range(n):
        level = mean + phi * (level - mean) + rng.normal(0.0, sd)
        out[t] = level
    return out


def generate(
    scenario: str, n_quarters: int, seed: int, start: Quarter = DEFAULT_START
) -> SyntheticPanel:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    if n_quarters < MIN_QUARTERS:
        raise LengthError(
            f"{n_quarters} quarters is too short for lags and training; need >= {MIN_QUARTERS}"
        )
    rng = np.random.default_rng(seed)
    total = n_quarters + BURN_IN

    tbill = np.maximum(_ar1(rng, total, 5.0, 0.9, 0.5), 0.0)
    shares = rng.normal(2.0, 4.0, total)
    corporate = _ar1(rng, total, 65.0, 0.8, 1.0)
    public = _ar1(rng, total, 50.0, 0.9, 1.5)
    t = np.arange(total) - BURN_IN
    cycle = DEBT_MEAN + DEBT_AMPLITUDE * np.sin(2 * np.pi * t / CYCLE_PERIOD + CYCLE_PHASE)
    household = cycle + _ar1(rng, total, 0.0, 0.5, 0.5)
    noise = rng.normal(0.0, GROWTH_NOISE, total)

    lagged = np.roll(np.arange(total), TRIGGER_LAG)  # index of t - 4
    tb_l, sh_l, hh_l = tbill[lagged], shares[lagged], household[lagged]
    if scenario == "linear":
        growth = (
            2.5
            - 0.4 * (tb_l - 5.0)
            + 0.15 * (sh_l - 2.0)
            - 0.12 * (hh_l - DEBT_MEAN)
            + noise
        )
        regime = np.zeros(total, dtype=bool)
        description = (
            "gdp_growth[t] = 2.5 - 0.4*(treasury_bill_3m[t-4] - 5) + 0.15*(share_price_change[t-4] - 2)"
            f" - 0.12*(household_debt_gdp[t-4] - {DEBT_MEAN:g}) + N(0, {GROWTH_NOISE:g}^2)"
        )
    else:
        regime = hh_l > DEBT_THRESHOLD
        calm = NORMAL_GROWTH - 0.2 * (tb_l - 5.0) + 0.05 * (sh_l - 2.0)
        growth = np.where(regime, RECESSION_GROWTH, calm) + noise
        description = (
            f"household_debt_gdp[t] = {DEBT_MEAN:g} + {DEBT_AMPLITUDE:g}*sin(2*pi*t/{CYCLE_PERIOD})"
            " + AR(1)(phi 0.5, sd 0.5); "
            f"gdp_growth[t] = {RECESSION_GROWTH:g} if household_debt_gdp[t-4] > {DEBT_THRESHOLD:g} "
            f"else {NORMAL_GROWTH:g} - 0.2*(treasury_bill_3m[t-4] - 5) + 0.05*(share_price_change[t-4] - 2); "
            f"plus N(0, {GROWTH_NOISE:g}^2); corporate_debt_gdp and public_debt_gdp are AR(1) noise"
        )

    keep = slice(BURN_IN, total)
    cols = {
        "gdp_growth": growth,
        "treasury_bill_3m": tbill,
        "share_price_change": shares,
        "household_debt_gdp": household,
        "corporate_debt_gdp": corporate,
        "public_debt_gdp": public,
    }
    series = tuple(QuarterlySeries(name, start, vals[keep]) for name, vals in cols.items())
    return SyntheticPanel(scenario, seed, series, regime[keep].copy(), description)
